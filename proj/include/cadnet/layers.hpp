#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cadnet/ops.hpp"
#include "cadnet/tensor.hpp"

namespace cadnet {

enum class LayerKind {
  Rescale,
  Conv2d,
  Relu,
  Pool,
  Flatten,
  Dense,
  Softmax,
  Residual,
};

std::string_view to_string(LayerKind kind);
std::string_view to_string(PoolMode mode);
LayerKind layer_kind_from_string(std::string_view s);
PoolMode pool_mode_from_string(std::string_view s);

/// A differentiable pipeline stage. forward() caches whatever backward()
/// needs, so a node is single-writer during a forward+backward pair; distinct
/// nodes may run on distinct threads. Frozen layers keep their parameter
/// gradients at exactly zero and receive no optimizer updates.
template <typename Scalar>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  virtual LayerKind kind() const = 0;

  /// Maps the input through the layer and caches activations for backward.
  virtual Tensor<Scalar> forward(const Tensor<Scalar>& input) = 0;

  /// Given dL/d(output), accumulates parameter gradients (unless frozen) and
  /// returns dL/d(input). Must follow a forward() on the same node.
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& upstream) = 0;

  /// Owned parameter tensors, in a fixed order matching gradients().
  virtual std::vector<Tensor<Scalar>*> parameters() { return {}; }
  virtual std::vector<Tensor<Scalar>*> gradients() { return {}; }

  void zero_grad() {
    for (Tensor<Scalar>* g : gradients()) g->array().setZero();
  }

  const std::string& name() const { return name_; }
  bool frozen() const { return frozen_; }
  virtual void set_frozen(bool frozen) { frozen_ = frozen; }

 protected:
  std::string name_;
  bool frozen_ = false;
};

template <typename Scalar>
class RescaleLayer final : public Layer<Scalar> {
 public:
  RescaleLayer(std::string name, Scalar factor)
      : Layer<Scalar>(std::move(name)), factor_(factor) {
    if (!(factor > Scalar(0))) {
      throw std::invalid_argument("rescale: factor must be > 0");
    }
  }

  LayerKind kind() const override { return LayerKind::Rescale; }
  Scalar factor() const { return factor_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    return rescale_forward(input, factor_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    Tensor<Scalar> grad(upstream.shape());
    grad.array() = upstream.array() * factor_;
    return grad;
  }

 private:
  Scalar factor_;
};

template <typename Scalar>
class Conv2dLayer final : public Layer<Scalar> {
 public:
  Conv2dLayer(std::string name, Index in_channels, Index out_channels,
              Index kernel_h, Index kernel_w)
      : Layer<Scalar>(std::move(name)),
        kernel_(KernelSpec<Scalar>::zeros(in_channels, out_channels, kernel_h,
                                          kernel_w)),
        weight_grad_(kernel_.weights.shape()),
        bias_grad_(kernel_.bias.shape()) {}

  LayerKind kind() const override { return LayerKind::Conv2d; }
  KernelSpec<Scalar>& kernel() { return kernel_; }
  const KernelSpec<Scalar>& kernel() const { return kernel_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    cached_input_ = input;
    has_cache_ = true;
    return conv2d_forward(input, kernel_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    require_cache(has_cache_, this->name());
    Conv2dGrads<Scalar> g = conv2d_backward(upstream, cached_input_, kernel_);
    if (!this->frozen()) {
      weight_grad_.array() += g.weight_grad.array();
      bias_grad_.array() += g.bias_grad.array();
    }
    return std::move(g.input_grad);
  }

  std::vector<Tensor<Scalar>*> parameters() override {
    return {&kernel_.weights, &kernel_.bias};
  }
  std::vector<Tensor<Scalar>*> gradients() override {
    return {&weight_grad_, &bias_grad_};
  }

 private:
  static void require_cache(bool ok, const std::string& name) {
    if (!ok) throw std::logic_error("backward before forward on " + name);
  }

  KernelSpec<Scalar> kernel_;
  Tensor<Scalar> weight_grad_;
  Tensor<Scalar> bias_grad_;
  Tensor<Scalar> cached_input_;
  bool has_cache_ = false;
};

template <typename Scalar>
class ReluLayer final : public Layer<Scalar> {
 public:
  explicit ReluLayer(std::string name) : Layer<Scalar>(std::move(name)) {}

  LayerKind kind() const override { return LayerKind::Relu; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    cached_input_ = input;
    return relu(input);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    return relu_backward(upstream, cached_input_);
  }

 private:
  Tensor<Scalar> cached_input_;
};

template <typename Scalar>
class PoolLayer final : public Layer<Scalar> {
 public:
  PoolLayer(std::string name, PoolSpec spec)
      : Layer<Scalar>(std::move(name)), spec_(spec) {}

  LayerKind kind() const override { return LayerKind::Pool; }
  const PoolSpec& pool_spec() const { return spec_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    cached_input_ = input;
    return pool_forward(input, spec_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    return pool_backward(upstream, cached_input_, spec_);
  }

 private:
  PoolSpec spec_;
  Tensor<Scalar> cached_input_;
};

template <typename Scalar>
class FlattenLayer final : public Layer<Scalar> {
 public:
  explicit FlattenLayer(std::string name) : Layer<Scalar>(std::move(name)) {}

  LayerKind kind() const override { return LayerKind::Flatten; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    cached_shape_ = input.shape();
    return flatten(input);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    return reshape(upstream, cached_shape_);
  }

 private:
  Shape cached_shape_;
};

template <typename Scalar>
class DenseLayer final : public Layer<Scalar> {
 public:
  DenseLayer(std::string name, Index in_features, Index units)
      : Layer<Scalar>(std::move(name)),
        weights_(Shape{units, in_features}),
        bias_(Shape{units}),
        weight_grad_(Shape{units, in_features}),
        bias_grad_(Shape{units}) {}

  LayerKind kind() const override { return LayerKind::Dense; }
  Tensor<Scalar>& weights() { return weights_; }
  Tensor<Scalar>& bias() { return bias_; }
  Index units() const { return weights_.shape().dim(0); }
  Index in_features() const { return weights_.shape().dim(1); }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    cached_input_ = input;
    return dense_forward(input, weights_, bias_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    DenseGrads<Scalar> g = dense_backward(upstream, cached_input_, weights_);
    if (!this->frozen()) {
      weight_grad_.array() += g.weight_grad.array();
      bias_grad_.array() += g.bias_grad.array();
    }
    return std::move(g.input_grad);
  }

  std::vector<Tensor<Scalar>*> parameters() override {
    return {&weights_, &bias_};
  }
  std::vector<Tensor<Scalar>*> gradients() override {
    return {&weight_grad_, &bias_grad_};
  }

 private:
  Tensor<Scalar> weights_;
  Tensor<Scalar> bias_;
  Tensor<Scalar> weight_grad_;
  Tensor<Scalar> bias_grad_;
  Tensor<Scalar> cached_input_;
};

template <typename Scalar>
class SoftmaxLayer final : public Layer<Scalar> {
 public:
  explicit SoftmaxLayer(std::string name) : Layer<Scalar>(std::move(name)) {}

  LayerKind kind() const override { return LayerKind::Softmax; }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    cached_output_ = softmax(input);
    return cached_output_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    return softmax_backward(upstream, cached_output_);
  }

 private:
  Tensor<Scalar> cached_output_;
};

/// Residual stage: output = body(x) + skip(x), where skip is the identity or
/// a 1x1 projection when the body changes the channel count. The body must
/// preserve spatial extents. Gradients flow through both branches and add.
template <typename Scalar>
class ResidualBlockLayer final : public Layer<Scalar> {
 public:
  ResidualBlockLayer(std::string name,
                     std::vector<std::unique_ptr<Layer<Scalar>>> body,
                     std::unique_ptr<Conv2dLayer<Scalar>> projection)
      : Layer<Scalar>(std::move(name)),
        body_(std::move(body)),
        projection_(std::move(projection)) {
    if (body_.empty()) {
      throw std::invalid_argument("residual block: empty body");
    }
  }

  LayerKind kind() const override { return LayerKind::Residual; }
  const std::vector<std::unique_ptr<Layer<Scalar>>>& body() const {
    return body_;
  }
  Conv2dLayer<Scalar>* projection() { return projection_.get(); }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) override {
    Tensor<Scalar> y = input;
    for (auto& layer : body_) y = layer->forward(y);
    const Tensor<Scalar> skip =
        projection_ ? projection_->forward(input) : input;
    if (y.shape() != skip.shape()) {
      throw std::invalid_argument("residual block " + this->name() +
                                  ": branch shape " + y.shape().to_string() +
                                  " != skip shape " + skip.shape().to_string());
    }
    y.array() += skip.array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) override {
    Tensor<Scalar> body_grad = upstream;
    for (auto it = body_.rbegin(); it != body_.rend(); ++it) {
      body_grad = (*it)->backward(body_grad);
    }
    Tensor<Scalar> skip_grad =
        projection_ ? projection_->backward(upstream) : upstream;
    body_grad.array() += skip_grad.array();
    return body_grad;
  }

  std::vector<Tensor<Scalar>*> parameters() override {
    std::vector<Tensor<Scalar>*> out;
    for (auto& layer : body_) {
      for (Tensor<Scalar>* p : layer->parameters()) out.push_back(p);
    }
    if (projection_) {
      for (Tensor<Scalar>* p : projection_->parameters()) out.push_back(p);
    }
    return out;
  }

  std::vector<Tensor<Scalar>*> gradients() override {
    std::vector<Tensor<Scalar>*> out;
    for (auto& layer : body_) {
      for (Tensor<Scalar>* g : layer->gradients()) out.push_back(g);
    }
    if (projection_) {
      for (Tensor<Scalar>* g : projection_->gradients()) out.push_back(g);
    }
    return out;
  }

  void set_frozen(bool frozen) override {
    Layer<Scalar>::set_frozen(frozen);
    for (auto& layer : body_) layer->set_frozen(frozen);
    if (projection_) projection_->set_frozen(frozen);
  }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> body_;
  std::unique_ptr<Conv2dLayer<Scalar>> projection_;
};

inline std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Rescale: return "rescale";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Pool: return "pool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Residual: return "residual";
  }
  return "?";
}

inline std::string_view to_string(PoolMode mode) {
  switch (mode) {
    case PoolMode::Max: return "max";
    case PoolMode::Average: return "average";
    case PoolMode::Sum: return "sum";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "rescale") return LayerKind::Rescale;
  if (s == "conv2d") return LayerKind::Conv2d;
  if (s == "relu") return LayerKind::Relu;
  if (s == "pool") return LayerKind::Pool;
  if (s == "flatten") return LayerKind::Flatten;
  if (s == "dense") return LayerKind::Dense;
  if (s == "softmax") return LayerKind::Softmax;
  if (s == "residual") return LayerKind::Residual;
  throw std::invalid_argument("unknown layer kind: " + std::string(s));
}

inline PoolMode pool_mode_from_string(std::string_view s) {
  if (s == "max") return PoolMode::Max;
  if (s == "average") return PoolMode::Average;
  if (s == "sum") return PoolMode::Sum;
  throw std::invalid_argument("unknown pool mode: " + std::string(s));
}

}  // namespace cadnet
