#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadnet/errors.hpp"
#include "cadnet/layers.hpp"
#include "cadnet/rng.hpp"
#include "cadnet/tensor.hpp"

namespace cadnet {

/// One layer descriptor: kind plus the hyperparameters that kind needs.
/// Channel/feature counts on the input side are inferred when the model is
/// built, so descriptors stay composable.
struct LayerDesc {
  std::string name;
  LayerKind kind = LayerKind::Relu;

  double factor = 1.0;                 // rescale
  Index out_channels = 0;              // conv2d
  Index kernel_h = 0, kernel_w = 0;    // conv2d
  PoolMode pool_mode = PoolMode::Max;  // pool
  Index window_h = 0, window_w = 0, stride = 0;
  Index units = 0;                     // dense
  std::vector<LayerDesc> body;         // residual branch

  static LayerDesc rescale(std::string name, double factor) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Rescale;
    d.factor = factor;
    return d;
  }
  static LayerDesc conv2d(std::string name, Index out_channels, Index kh,
                          Index kw) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Conv2d;
    d.out_channels = out_channels;
    d.kernel_h = kh;
    d.kernel_w = kw;
    return d;
  }
  static LayerDesc relu(std::string name) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Relu;
    return d;
  }
  static LayerDesc pool(std::string name, PoolMode mode, Index window,
                        Index stride) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Pool;
    d.pool_mode = mode;
    d.window_h = window;
    d.window_w = window;
    d.stride = stride;
    return d;
  }
  static LayerDesc flatten(std::string name) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Flatten;
    return d;
  }
  static LayerDesc dense(std::string name, Index units) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Dense;
    d.units = units;
    return d;
  }
  static LayerDesc softmax(std::string name) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Softmax;
    return d;
  }
  static LayerDesc residual(std::string name, std::vector<LayerDesc> body) {
    LayerDesc d;
    d.name = std::move(name);
    d.kind = LayerKind::Residual;
    d.body = std::move(body);
    return d;
  }
};

/// Named ordered list of layer descriptors plus the input contract. A valid
/// spec composes shape-wise from input to output and ends in
/// dense(num_classes) followed by softmax.
struct ModelSpec {
  std::string name;
  Shape input_shape;  // [channels, height, width]
  Index num_classes = 0;
  std::vector<LayerDesc> layers;
};

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// Output shape of one layer applied to `input`. Throws BuildError when the
/// layer cannot consume that shape (kernel larger than input, etc.).
Shape infer_output_shape(const LayerDesc& desc, const Shape& input);

/// Walks the whole stack, checking that adjacent shapes compose and the model
/// ends in dense(num_classes) + softmax. Returns the output shape.
Shape validate_spec(const ModelSpec& spec);

namespace detail {

inline Shape infer_conv_shape(const LayerDesc& d, const Shape& in,
                              const std::string& where) {
  if (in.rank() != 3) {
    throw BuildError(where + ": conv2d needs [C,H,W] input, got " +
                     in.to_string());
  }
  if (d.out_channels < 1 || d.kernel_h < 1 || d.kernel_w < 1) {
    throw BuildError(where + ": conv2d extents must be >= 1");
  }
  if (in.dim(1) < d.kernel_h || in.dim(2) < d.kernel_w) {
    throw BuildError(where + ": kernel " + std::to_string(d.kernel_h) + "x" +
                     std::to_string(d.kernel_w) + " larger than input " +
                     in.to_string() + " (input too small for the stack)");
  }
  return Shape{d.out_channels, in.dim(1) - d.kernel_h + 1,
               in.dim(2) - d.kernel_w + 1};
}

inline Shape infer_pool_shape(const LayerDesc& d, const Shape& in,
                              const std::string& where) {
  if (in.rank() != 3) {
    throw BuildError(where + ": pool needs [C,H,W] input, got " +
                     in.to_string());
  }
  if (d.window_h < 1 || d.window_w < 1 || d.stride < 1) {
    throw BuildError(where + ": pool window and stride must be >= 1");
  }
  if (d.window_h > in.dim(1) || d.window_w > in.dim(2)) {
    throw BuildError(where + ": pool window " + std::to_string(d.window_h) +
                     "x" + std::to_string(d.window_w) + " exceeds input " +
                     in.to_string() + " (input too small for the stack)");
  }
  return Shape{in.dim(0), pooled_extent(in.dim(1), d.window_h, d.stride),
               pooled_extent(in.dim(2), d.window_w, d.stride)};
}

}  // namespace detail

inline Shape infer_output_shape(const LayerDesc& desc, const Shape& input) {
  const std::string where = "layer '" + desc.name + "'";
  switch (desc.kind) {
    case LayerKind::Rescale:
    case LayerKind::Relu:
    case LayerKind::Softmax:
      return input;
    case LayerKind::Conv2d:
      return detail::infer_conv_shape(desc, input, where);
    case LayerKind::Pool:
      return detail::infer_pool_shape(desc, input, where);
    case LayerKind::Flatten:
      return Shape{input.count()};
    case LayerKind::Dense:
      if (input.rank() != 1) {
        throw BuildError(where + ": dense needs rank-1 input, got " +
                         input.to_string());
      }
      if (desc.units < 1) throw BuildError(where + ": dense units must be >= 1");
      return Shape{desc.units};
    case LayerKind::Residual: {
      if (desc.body.empty()) {
        throw BuildError(where + ": residual block needs a nonempty body");
      }
      Shape branch = input;
      for (const LayerDesc& inner : desc.body) {
        branch = infer_output_shape(inner, branch);
      }
      if (branch.rank() != 3 || input.rank() != 3) {
        throw BuildError(where + ": residual body must map [C,H,W] to [C,H,W]");
      }
      if (branch.dim(1) != input.dim(1) || branch.dim(2) != input.dim(2)) {
        throw BuildError(where + ": residual body changes spatial extent " +
                         input.to_string() + " -> " + branch.to_string());
      }
      return branch;  // channel change is handled by a 1x1 projection
    }
  }
  throw BuildError(where + ": unknown layer kind");
}

inline Shape validate_spec(const ModelSpec& spec) {
  if (spec.layers.empty()) throw BuildError("model spec has no layers");
  if (spec.input_shape.rank() != 3) {
    throw BuildError("model input shape must be [channels, height, width]");
  }
  Shape shape = spec.input_shape;
  for (const LayerDesc& d : spec.layers) {
    if (d.name.empty()) throw BuildError("unnamed layer in spec");
    shape = infer_output_shape(d, shape);
  }
  const std::size_t n = spec.layers.size();
  if (n < 2 || spec.layers[n - 1].kind != LayerKind::Softmax ||
      spec.layers[n - 2].kind != LayerKind::Dense ||
      spec.layers[n - 2].units != spec.num_classes) {
    throw BuildError("model must end in dense(num_classes) + softmax");
  }
  if (shape != Shape{spec.num_classes}) {
    throw BuildError("model output shape " + shape.to_string() +
                     " != [num_classes]");
  }
  return shape;
}

/// A built pipeline: the spec plus instantiated layer nodes. forward() runs
/// the whole stack and yields class probabilities; backward_from_logits()
/// starts just below the final softmax, pairing with the fused
/// softmax/cross-entropy gradient.
template <typename Scalar>
class Model {
 public:
  Model() = default;
  Model(ModelSpec spec, std::vector<std::unique_ptr<Layer<Scalar>>> layers)
      : spec_(std::move(spec)), layers_(std::move(layers)) {}
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  Index num_classes() const { return spec_.num_classes; }
  const Shape& input_shape() const { return spec_.input_shape; }

  Index num_layers() const { return static_cast<Index>(layers_.size()); }
  Layer<Scalar>& layer(Index i) { return *layers_[static_cast<std::size_t>(i)]; }
  const Layer<Scalar>& layer(Index i) const {
    return *layers_[static_cast<std::size_t>(i)];
  }
  Layer<Scalar>* find_layer(std::string_view name) {
    for (auto& l : layers_) {
      if (l->name() == name) return l.get();
    }
    return nullptr;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) {
    Tensor<Scalar> x = input;
    for (auto& l : layers_) x = l->forward(x);
    return x;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) {
    Tensor<Scalar> g = upstream;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = (*it)->backward(g);
    }
    return g;
  }

  /// Backward pass that skips the final softmax layer; `upstream` is the
  /// gradient at the logits (e.g. softmax(z) - onehot(label)).
  Tensor<Scalar> backward_from_logits(const Tensor<Scalar>& upstream) {
    if (layers_.empty() || layers_.back()->kind() != LayerKind::Softmax) {
      throw std::logic_error("backward_from_logits: model does not end in softmax");
    }
    Tensor<Scalar> g = upstream;
    for (auto it = layers_.rbegin() + 1; it != layers_.rend(); ++it) {
      g = (*it)->backward(g);
    }
    return g;
  }

  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  /// Parameter/gradient pairs in layer order, tagged with the owning layer.
  struct ParamRef {
    Tensor<Scalar>* value;
    Tensor<Scalar>* grad;
    bool frozen;
    const Layer<Scalar>* owner;
  };

  std::vector<ParamRef> param_refs() {
    std::vector<ParamRef> refs;
    for (auto& l : layers_) {
      auto params = l->parameters();
      auto grads = l->gradients();
      for (std::size_t i = 0; i < params.size(); ++i) {
        refs.push_back(ParamRef{params[i], grads[i], l->frozen(), l.get()});
      }
    }
    return refs;
  }

 private:
  ModelSpec spec_;
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

namespace detail {

/// Glorot-uniform fill: limit = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
void glorot_init(Tensor<Scalar>& weights, Index fan_in, Index fan_out,
                 RngState& rng) {
  const Scalar limit =
      Scalar(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
  weights = uniform(weights.shape(), -limit, limit, rng);
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> instantiate_layer(const LayerDesc& d,
                                                 const Shape& input,
                                                 RngState* rng) {
  switch (d.kind) {
    case LayerKind::Rescale:
      return std::make_unique<RescaleLayer<Scalar>>(d.name, Scalar(d.factor));
    case LayerKind::Relu:
      return std::make_unique<ReluLayer<Scalar>>(d.name);
    case LayerKind::Softmax:
      return std::make_unique<SoftmaxLayer<Scalar>>(d.name);
    case LayerKind::Flatten:
      return std::make_unique<FlattenLayer<Scalar>>(d.name);
    case LayerKind::Pool: {
      PoolSpec p;
      p.mode = d.pool_mode;
      p.window_h = d.window_h;
      p.window_w = d.window_w;
      p.stride = d.stride;
      return std::make_unique<PoolLayer<Scalar>>(d.name, p);
    }
    case LayerKind::Conv2d: {
      auto conv = std::make_unique<Conv2dLayer<Scalar>>(
          d.name, input.dim(0), d.out_channels, d.kernel_h, d.kernel_w);
      if (rng) {
        const Index fan_in = input.dim(0) * d.kernel_h * d.kernel_w;
        const Index fan_out = d.out_channels * d.kernel_h * d.kernel_w;
        glorot_init(conv->kernel().weights, fan_in, fan_out, *rng);
      }
      return conv;
    }
    case LayerKind::Dense: {
      auto dense =
          std::make_unique<DenseLayer<Scalar>>(d.name, input.count(), d.units);
      if (rng) glorot_init(dense->weights(), input.count(), d.units, *rng);
      return dense;
    }
    case LayerKind::Residual: {
      std::vector<std::unique_ptr<Layer<Scalar>>> body;
      Shape shape = input;
      for (const LayerDesc& inner : d.body) {
        body.push_back(instantiate_layer<Scalar>(inner, shape, rng));
        shape = infer_output_shape(inner, shape);
      }
      std::unique_ptr<Conv2dLayer<Scalar>> projection;
      if (shape.dim(0) != input.dim(0)) {
        projection = std::make_unique<Conv2dLayer<Scalar>>(
            d.name + "_proj", input.dim(0), shape.dim(0), 1, 1);
        if (rng) {
          glorot_init(projection->kernel().weights, input.dim(0), shape.dim(0),
                      *rng);
        }
      }
      return std::make_unique<ResidualBlockLayer<Scalar>>(
          d.name, std::move(body), std::move(projection));
    }
  }
  throw BuildError("layer '" + d.name + "': unknown layer kind");
}

}  // namespace detail

/// Builds the layer stack for a validated spec. With an RngState, conv and
/// dense weights get Glorot-uniform initial values (biases start at zero);
/// without one every parameter is zero, ready for a weight archive load.
template <typename Scalar>
Model<Scalar> build_model(const ModelSpec& spec, RngState* rng = nullptr) {
  validate_spec(spec);
  std::vector<std::unique_ptr<Layer<Scalar>>> layers;
  Shape shape = spec.input_shape;
  for (const LayerDesc& d : spec.layers) {
    layers.push_back(detail::instantiate_layer<Scalar>(d, shape, rng));
    shape = infer_output_shape(d, shape);
  }
  return Model<Scalar>(spec, std::move(layers));
}

template <typename Scalar>
Model<Scalar> build_model(const ModelSpec& spec, RngState& rng) {
  return build_model<Scalar>(spec, &rng);
}

/// Same-architecture copy with every parameter converted elementwise and
/// frozen flags preserved; used to re-run gradient checks in double precision.
template <typename To, typename From>
Model<To> cast_model(Model<From>& source) {
  Model<To> out = build_model<To>(source.spec());
  auto src = source.param_refs();
  auto dst = out.param_refs();
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (Index j = 0; j < src[i].value->size(); ++j) {
      (*dst[i].value)[j] = static_cast<To>((*src[i].value)[j]);
    }
  }
  for (Index i = 0; i < source.num_layers(); ++i) {
    out.layer(i).set_frozen(source.layer(i).frozen());
  }
  return out;
}

}  // namespace cadnet
