#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cadnet/model.hpp"

namespace cadnet {

/// Pixel normalization applied by every builder's first layer.
inline constexpr double kPixelRescale = 1.0 / 255.0;

/// Three conv/relu/maxpool stages with widths (8,16,32) x scale, then
/// flatten, a hidden dense layer with relu, and a dense(K) + softmax head.
ModelSpec proposed_cnn_spec(const Shape& input_shape, Index num_classes,
                            Index scale = 1);

/// Stage widths for the stacked 3x3-conv builder. Each block is a run of
/// same-width 3x3 convs followed by a 2x2 max-pool; dense_units lists the
/// hidden fully connected widths before the classification head.
struct VggProfile {
  std::vector<std::vector<Index>> conv_blocks;
  std::vector<Index> dense_units;

  /// CPU-scale profile used by the tests: two shallow blocks, one hidden
  /// dense layer. Preserves the block structure of the full profile.
  static VggProfile desk() {
    return VggProfile{{{8}, {16}}, {32}};
  }

  /// The canonical 16-layer profile (13 convs + 3 dense stages including the
  /// head). Untested at scale on CPU; shipped for completeness.
  static VggProfile full() {
    return VggProfile{
        {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}},
        {4096, 4096}};
  }
};

ModelSpec vgg_style_spec(const Shape& input_shape, Index num_classes,
                         const VggProfile& profile = VggProfile::desk());

/// Conv stem + pool, then `blocks` residual stages of 1x1-conv bodies
/// (x + F(x), with a 1x1 projection whenever the width doubles), a global
/// average pool, and a dense(K) + softmax head. Width starts at
/// stem_channels and doubles from the second block on.
ModelSpec residual_style_spec(const Shape& input_shape, Index num_classes,
                              Index blocks = 2, Index stem_channels = 8);

/// Replaces the final dense(K') + softmax with a freshly initialized
/// dense(new_classes) + softmax. Every other tensor is preserved bitwise.
template <typename Scalar>
Model<Scalar> replace_head(Model<Scalar>& model, Index new_classes,
                           RngState& rng) {
  ModelSpec spec = model.spec();
  const std::size_t n = spec.layers.size();
  if (n < 2 || spec.layers[n - 1].kind != LayerKind::Softmax ||
      spec.layers[n - 2].kind != LayerKind::Dense) {
    throw BuildError("replace_head: model lacks a dense + softmax head");
  }
  spec.layers[n - 2].units = new_classes;
  spec.num_classes = new_classes;

  Model<Scalar> out = build_model<Scalar>(spec, rng);
  // Overwrite everything except the head with the source weights.
  auto src = model.param_refs();
  auto dst = out.param_refs();
  Layer<Scalar>* head = out.find_layer(spec.layers[n - 2].name);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (dst[i].owner == head) continue;
    *dst[i].value = *src[i].value;
  }
  for (Index i = 0; i < model.num_layers(); ++i) {
    out.layer(i).set_frozen(model.layer(i).frozen());
  }
  return out;
}

/// Marks every layer up to and including `boundary` frozen. Frozen layers
/// accumulate no parameter gradients and receive no optimizer updates.
template <typename Scalar>
void freeze_features(Model<Scalar>& model, std::string_view boundary) {
  Index end = -1;
  for (Index i = 0; i < model.num_layers(); ++i) {
    if (model.layer(i).name() == boundary) {
      end = i;
      break;
    }
  }
  if (end < 0) {
    throw BuildError("freeze_features: unknown layer '" +
                     std::string(boundary) + "'");
  }
  for (Index i = 0; i <= end; ++i) {
    model.layer(i).set_frozen(true);
  }
}

inline ModelSpec proposed_cnn_spec(const Shape& input_shape, Index num_classes,
                                   Index scale) {
  if (scale < 1) throw BuildError("proposed_cnn: scale must be >= 1");
  ModelSpec spec;
  spec.name = "proposed";
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  spec.layers.push_back(LayerDesc::rescale("rescale", kPixelRescale));
  const Index widths[3] = {8 * scale, 16 * scale, 32 * scale};
  for (int i = 0; i < 3; ++i) {
    const std::string n = std::to_string(i + 1);
    spec.layers.push_back(LayerDesc::conv2d("conv" + n, widths[i], 3, 3));
    spec.layers.push_back(LayerDesc::relu("relu" + n));
    spec.layers.push_back(LayerDesc::pool("pool" + n, PoolMode::Max, 2, 2));
  }
  spec.layers.push_back(LayerDesc::flatten("flatten"));
  spec.layers.push_back(LayerDesc::dense("fc1", 64 * scale));
  spec.layers.push_back(LayerDesc::relu("fc1_relu"));
  spec.layers.push_back(LayerDesc::dense("head", num_classes));
  spec.layers.push_back(LayerDesc::softmax("softmax"));
  validate_spec(spec);
  return spec;
}

inline ModelSpec vgg_style_spec(const Shape& input_shape, Index num_classes,
                                const VggProfile& profile) {
  if (profile.conv_blocks.empty()) {
    throw BuildError("vgg_style: profile needs at least one conv block");
  }
  ModelSpec spec;
  spec.name = "vgg_style";
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  spec.layers.push_back(LayerDesc::rescale("rescale", kPixelRescale));
  for (std::size_t b = 0; b < profile.conv_blocks.size(); ++b) {
    const std::string block = "block" + std::to_string(b + 1);
    for (std::size_t c = 0; c < profile.conv_blocks[b].size(); ++c) {
      const std::string n = block + "_conv" + std::to_string(c + 1);
      spec.layers.push_back(
          LayerDesc::conv2d(n, profile.conv_blocks[b][c], 3, 3));
      spec.layers.push_back(LayerDesc::relu(n + "_relu"));
    }
    spec.layers.push_back(
        LayerDesc::pool(block + "_pool", PoolMode::Max, 2, 2));
  }
  spec.layers.push_back(LayerDesc::flatten("flatten"));
  for (std::size_t i = 0; i < profile.dense_units.size(); ++i) {
    const std::string n = "fc" + std::to_string(i + 1);
    spec.layers.push_back(LayerDesc::dense(n, profile.dense_units[i]));
    spec.layers.push_back(LayerDesc::relu(n + "_relu"));
  }
  spec.layers.push_back(LayerDesc::dense("head", num_classes));
  spec.layers.push_back(LayerDesc::softmax("softmax"));
  validate_spec(spec);
  return spec;
}

inline ModelSpec residual_style_spec(const Shape& input_shape,
                                     Index num_classes, Index blocks,
                                     Index stem_channels) {
  if (blocks < 0) throw BuildError("residual_style: blocks must be >= 0");
  if (stem_channels < 1) {
    throw BuildError("residual_style: stem_channels must be >= 1");
  }
  ModelSpec spec;
  spec.name = "residual_style";
  spec.input_shape = input_shape;
  spec.num_classes = num_classes;
  spec.layers.push_back(LayerDesc::rescale("rescale", kPixelRescale));
  spec.layers.push_back(LayerDesc::conv2d("stem", stem_channels, 3, 3));
  spec.layers.push_back(LayerDesc::relu("stem_relu"));
  spec.layers.push_back(LayerDesc::pool("stem_pool", PoolMode::Max, 2, 2));

  Index width = stem_channels;
  for (Index b = 0; b < blocks; ++b) {
    if (b > 0) width *= 2;  // projection on every widening block
    const std::string n = "res" + std::to_string(b + 1);
    std::vector<LayerDesc> body;
    body.push_back(LayerDesc::conv2d(n + "_conv1", width, 1, 1));
    body.push_back(LayerDesc::relu(n + "_relu"));
    body.push_back(LayerDesc::conv2d(n + "_conv2", width, 1, 1));
    spec.layers.push_back(LayerDesc::residual(n, std::move(body)));
    spec.layers.push_back(LayerDesc::relu(n + "_out_relu"));
  }

  // Global average pool over whatever spatial extent is left.
  Shape shape = spec.input_shape;
  for (const LayerDesc& d : spec.layers) shape = infer_output_shape(d, shape);
  LayerDesc gap;
  gap.name = "head_pool";
  gap.kind = LayerKind::Pool;
  gap.pool_mode = PoolMode::Average;
  gap.window_h = shape.dim(1);
  gap.window_w = shape.dim(2);
  gap.stride = 1;
  spec.layers.push_back(gap);
  spec.layers.push_back(LayerDesc::flatten("flatten"));
  spec.layers.push_back(LayerDesc::dense("head", num_classes));
  spec.layers.push_back(LayerDesc::softmax("softmax"));
  validate_spec(spec);
  return spec;
}

}  // namespace cadnet
