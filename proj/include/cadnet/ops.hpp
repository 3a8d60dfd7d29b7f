#pragma once

#include <stdexcept>
#include <string>

#include "cadnet/tensor.hpp"

namespace cadnet {

enum class PoolMode { Max, Average, Sum };

/// Convolution filter stack: weights [out_channels, in_channels, kernel_h,
/// kernel_w], bias [out_channels].
template <typename Scalar>
struct KernelSpec {
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel_h = 0;
  Index kernel_w = 0;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;

  static KernelSpec zeros(Index in_c, Index out_c, Index kh, Index kw) {
    if (kh < 1 || kw < 1 || in_c < 1 || out_c < 1) {
      throw std::invalid_argument("KernelSpec: extents must be >= 1");
    }
    KernelSpec k;
    k.in_channels = in_c;
    k.out_channels = out_c;
    k.kernel_h = kh;
    k.kernel_w = kw;
    k.weights = Tensor<Scalar>(Shape{out_c, in_c, kh, kw});
    k.bias = Tensor<Scalar>(Shape{out_c});
    return k;
  }
};

/// Valid 2-D cross-correlation, no padding, stride 1, plus per-output-channel
/// bias. Input [C,H,W] with an f_h x f_w kernel yields [O, H-f_h+1, W-f_w+1].
///
/// Note on orientation: this is cross-correlation, the deep-learning
/// convention. True convolution flips the kernel 180 degrees; learned filters
/// make the distinction immaterial, and the standard filter bank shipped with
/// the image module is 180-degree symmetric.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input,
                              const KernelSpec<Scalar>& k) {
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d: input must be [C,H,W], got " +
                                input.shape().to_string());
  }
  const Index c = input.shape().dim(0);
  const Index h = input.shape().dim(1);
  const Index w = input.shape().dim(2);
  if (c != k.in_channels) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(c) +
                                " channels, kernel expects " +
                                std::to_string(k.in_channels));
  }
  if (h < k.kernel_h || w < k.kernel_w) {
    throw std::invalid_argument("conv2d: kernel " + std::to_string(k.kernel_h) +
                                "x" + std::to_string(k.kernel_w) +
                                " larger than input " + std::to_string(h) +
                                "x" + std::to_string(w));
  }
  const Index oh = h - k.kernel_h + 1;
  const Index ow = w - k.kernel_w + 1;
  Tensor<Scalar> out(Shape{k.out_channels, oh, ow});
  for (Index oc = 0; oc < k.out_channels; ++oc) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        Scalar acc = k.bias[oc];
        for (Index ic = 0; ic < k.in_channels; ++ic) {
          for (Index ky = 0; ky < k.kernel_h; ++ky) {
            for (Index kx = 0; kx < k.kernel_w; ++kx) {
              acc += k.weights(oc, ic, ky, kx) * input(ic, y + ky, x + kx);
            }
          }
        }
        out(oc, y, x) = acc;
      }
    }
  }
  return out;
}

template <typename Scalar>
struct Conv2dGrads {
  Tensor<Scalar> input_grad;
  Tensor<Scalar> weight_grad;
  Tensor<Scalar> bias_grad;
};

/// Gradients of the valid cross-correlation w.r.t. input, weights, and bias,
/// given the upstream gradient at the forward output.
template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& upstream,
                                    const Tensor<Scalar>& cached_input,
                                    const KernelSpec<Scalar>& k) {
  const Index oh = cached_input.shape().dim(1) - k.kernel_h + 1;
  const Index ow = cached_input.shape().dim(2) - k.kernel_w + 1;
  const Shape expected{k.out_channels, oh, ow};
  if (upstream.shape() != expected) {
    throw std::invalid_argument("conv2d backward: upstream shape " +
                                upstream.shape().to_string() + " != " +
                                expected.to_string());
  }
  Conv2dGrads<Scalar> g;
  g.input_grad = Tensor<Scalar>(cached_input.shape());
  g.weight_grad = Tensor<Scalar>(k.weights.shape());
  g.bias_grad = Tensor<Scalar>(k.bias.shape());
  for (Index oc = 0; oc < k.out_channels; ++oc) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        const Scalar up = upstream(oc, y, x);
        g.bias_grad[oc] += up;
        for (Index ic = 0; ic < k.in_channels; ++ic) {
          for (Index ky = 0; ky < k.kernel_h; ++ky) {
            for (Index kx = 0; kx < k.kernel_w; ++kx) {
              g.weight_grad(oc, ic, ky, kx) +=
                  up * cached_input(ic, y + ky, x + kx);
              g.input_grad(ic, y + ky, x + kx) +=
                  up * k.weights(oc, ic, ky, kx);
            }
          }
        }
      }
    }
  }
  return g;
}

/// Elementwise max(0, x).
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.shape());
  out.array() = x.array().max(Scalar(0));
  return out;
}

/// Passes upstream where the cached input is > 0, zero elsewhere. The
/// subgradient at exactly 0 is 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& upstream,
                             const Tensor<Scalar>& cached_input) {
  if (upstream.shape() != cached_input.shape()) {
    throw std::invalid_argument("relu backward: shape mismatch");
  }
  Tensor<Scalar> out(upstream.shape());
  out.array() =
      (cached_input.array() > Scalar(0)).select(upstream.array(), Scalar(0));
  return out;
}

struct PoolSpec {
  PoolMode mode = PoolMode::Max;
  Index window_h = 2;
  Index window_w = 2;
  Index stride = 2;
};

inline Index pooled_extent(Index in, Index window, Index stride) {
  return (in - window) / stride + 1;
}

/// Windowed spatial reduction of [C,H,W]. Output spatial extent per axis is
/// floor((in - window) / stride) + 1; the window must fit the input.
template <typename Scalar>
Tensor<Scalar> pool_forward(const Tensor<Scalar>& input, const PoolSpec& p) {
  if (input.rank() != 3) {
    throw std::invalid_argument("pool: input must be [C,H,W]");
  }
  if (p.window_h < 1 || p.window_w < 1 || p.stride < 1) {
    throw std::invalid_argument("pool: window and stride must be >= 1");
  }
  const Index c = input.shape().dim(0);
  const Index h = input.shape().dim(1);
  const Index w = input.shape().dim(2);
  if (p.window_h > h || p.window_w > w) {
    throw std::invalid_argument("pool: window exceeds input " +
                                input.shape().to_string());
  }
  const Index oh = pooled_extent(h, p.window_h, p.stride);
  const Index ow = pooled_extent(w, p.window_w, p.stride);
  Tensor<Scalar> out(Shape{c, oh, ow});
  const Scalar window_area = Scalar(p.window_h * p.window_w);
  for (Index ch = 0; ch < c; ++ch) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        const Index y0 = y * p.stride;
        const Index x0 = x * p.stride;
        Scalar acc = input(ch, y0, x0);
        if (p.mode == PoolMode::Max) {
          for (Index wy = 0; wy < p.window_h; ++wy) {
            for (Index wx = 0; wx < p.window_w; ++wx) {
              const Scalar v = input(ch, y0 + wy, x0 + wx);
              if (v > acc) acc = v;
            }
          }
        } else {
          acc = Scalar(0);
          for (Index wy = 0; wy < p.window_h; ++wy) {
            for (Index wx = 0; wx < p.window_w; ++wx) {
              acc += input(ch, y0 + wy, x0 + wx);
            }
          }
          if (p.mode == PoolMode::Average) acc /= window_area;
        }
        out(ch, y, x) = acc;
      }
    }
  }
  return out;
}

/// Routes the upstream gradient back through the pooling windows: max sends
/// it to the first (row-major) maximum cell of each window, average spreads
/// it by 1/area, sum replicates it. Overlapping windows accumulate.
template <typename Scalar>
Tensor<Scalar> pool_backward(const Tensor<Scalar>& upstream,
                             const Tensor<Scalar>& cached_input,
                             const PoolSpec& p) {
  const Index c = cached_input.shape().dim(0);
  const Index h = cached_input.shape().dim(1);
  const Index w = cached_input.shape().dim(2);
  const Index oh = pooled_extent(h, p.window_h, p.stride);
  const Index ow = pooled_extent(w, p.window_w, p.stride);
  if (upstream.shape() != Shape{c, oh, ow}) {
    throw std::invalid_argument("pool backward: upstream shape " +
                                upstream.shape().to_string() +
                                " inconsistent with cache");
  }
  Tensor<Scalar> grad(cached_input.shape());
  const Scalar window_area = Scalar(p.window_h * p.window_w);
  for (Index ch = 0; ch < c; ++ch) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        const Index y0 = y * p.stride;
        const Index x0 = x * p.stride;
        const Scalar up = upstream(ch, y, x);
        switch (p.mode) {
          case PoolMode::Max: {
            Index by = 0, bx = 0;
            Scalar best = cached_input(ch, y0, x0);
            for (Index wy = 0; wy < p.window_h; ++wy) {
              for (Index wx = 0; wx < p.window_w; ++wx) {
                const Scalar v = cached_input(ch, y0 + wy, x0 + wx);
                if (v > best) {
                  best = v;
                  by = wy;
                  bx = wx;
                }
              }
            }
            grad(ch, y0 + by, x0 + bx) += up;
            break;
          }
          case PoolMode::Average:
            for (Index wy = 0; wy < p.window_h; ++wy) {
              for (Index wx = 0; wx < p.window_w; ++wx) {
                grad(ch, y0 + wy, x0 + wx) += up / window_area;
              }
            }
            break;
          case PoolMode::Sum:
            for (Index wy = 0; wy < p.window_h; ++wy) {
              for (Index wx = 0; wx < p.window_w; ++wx) {
                grad(ch, y0 + wy, x0 + wx) += up;
              }
            }
            break;
        }
      }
    }
  }
  return grad;
}

/// Wx + b for input [n], weights [m,n], bias [m]. Row-major accumulation.
template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& input,
                             const Tensor<Scalar>& weights,
                             const Tensor<Scalar>& bias) {
  if (input.rank() != 1 || weights.rank() != 2 || bias.rank() != 1) {
    throw std::invalid_argument("dense: ranks must be input[n], W[m,n], b[m]");
  }
  const Index m = weights.shape().dim(0);
  const Index n = weights.shape().dim(1);
  if (input.size() != n || bias.size() != m) {
    throw std::invalid_argument("dense: dimension mismatch, W " +
                                weights.shape().to_string() + ", x " +
                                input.shape().to_string() + ", b " +
                                bias.shape().to_string());
  }
  Tensor<Scalar> out(Shape{m});
  for (Index i = 0; i < m; ++i) {
    Scalar acc = bias[i];
    for (Index j = 0; j < n; ++j) {
      acc += weights(i, j) * input[j];
    }
    out[i] = acc;
  }
  return out;
}

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input_grad;
  Tensor<Scalar> weight_grad;
  Tensor<Scalar> bias_grad;
};

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& upstream,
                                  const Tensor<Scalar>& cached_input,
                                  const Tensor<Scalar>& weights) {
  const Index m = weights.shape().dim(0);
  const Index n = weights.shape().dim(1);
  if (upstream.size() != m || cached_input.size() != n) {
    throw std::invalid_argument("dense backward: shape mismatch with cache");
  }
  DenseGrads<Scalar> g;
  g.input_grad = Tensor<Scalar>(Shape{n});
  g.weight_grad = Tensor<Scalar>(Shape{m, n});
  g.bias_grad = Tensor<Scalar>(Shape{m});
  for (Index j = 0; j < n; ++j) {
    Scalar acc = Scalar(0);
    for (Index i = 0; i < m; ++i) {
      acc += weights(i, j) * upstream[i];
    }
    g.input_grad[j] = acc;
  }
  for (Index i = 0; i < m; ++i) {
    g.bias_grad[i] = upstream[i];
    for (Index j = 0; j < n; ++j) {
      g.weight_grad(i, j) = upstream[i] * cached_input[j];
    }
  }
  return g;
}

/// Row-major flattening to rank 1; element count preserved.
template <typename Scalar>
Tensor<Scalar> flatten(const Tensor<Scalar>& input) {
  return reshape(input, Shape{input.size()});
}

/// exp(z_i - max z) / sum_j exp(z_j - max z). Max subtraction keeps the
/// exponentials in range; the output sums to 1 and every entry is in (0,1].
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  if (logits.rank() != 1 || logits.size() < 1) {
    throw std::invalid_argument("softmax: nonempty rank-1 tensor required");
  }
  if (!logits.array().isFinite().all()) {
    throw std::invalid_argument("softmax: non-finite logit");
  }
  Tensor<Scalar> out(logits.shape());
  const Scalar max_logit = logits.array().maxCoeff();
  out.array() = (logits.array() - max_logit).exp();
  out.array() /= out.array().sum();
  return out;
}

/// dL/dz_j = y_j * (g_j - sum_i g_i y_i), where y is the cached softmax
/// output and g the upstream gradient at y.
template <typename Scalar>
Tensor<Scalar> softmax_backward(const Tensor<Scalar>& upstream,
                                const Tensor<Scalar>& cached_output) {
  if (upstream.shape() != cached_output.shape()) {
    throw std::invalid_argument("softmax backward: shape mismatch");
  }
  const Scalar dot = (upstream.array() * cached_output.array()).sum();
  Tensor<Scalar> out(upstream.shape());
  out.array() = cached_output.array() * (upstream.array() - dot);
  return out;
}

/// Elementwise multiplication by a positive factor (input normalization,
/// e.g. 1/255 for 8-bit pixels).
template <typename Scalar>
Tensor<Scalar> rescale_forward(const Tensor<Scalar>& input, Scalar factor) {
  if (!(factor > Scalar(0))) {
    throw std::invalid_argument("rescale: factor must be > 0");
  }
  Tensor<Scalar> out(input.shape());
  out.array() = input.array() * factor;
  return out;
}

}  // namespace cadnet
