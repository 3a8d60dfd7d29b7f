#include <cmath>
#include <doctest.h>

#include "cadnet/image.hpp"
#include "cadnet/layers.hpp"
#include "cadnet/ops.hpp"
#include "gradient_probe.hpp"

using namespace cadnet;

namespace {

KernelSpec<float> kernel_from(std::initializer_list<float> values, Index kh,
                              Index kw, float bias = 0.0f) {
  KernelSpec<float> k = KernelSpec<float>::zeros(1, 1, kh, kw);
  Index i = 0;
  for (float v : values) k.weights[i++] = v;
  k.bias[0] = bias;
  return k;
}

}  // namespace

TEST_CASE("conv2d output dimension formula") {
  const Tensor<float> input(Shape{1, 5, 5}, 1.0f);
  for (Index out_c : {1, 3}) {
    KernelSpec<float> k = KernelSpec<float>::zeros(1, out_c, 3, 3);
    const auto out = conv2d_forward(input, k);
    CHECK(out.shape() == Shape{out_c, 3, 3});
  }
}

TEST_CASE("conv2d identity kernel reproduces the central crop") {
  RngState rng(11);
  const auto img = uniform<float>(Shape{1, 6, 7}, 0.0f, 255.0f, rng);
  const auto k = kernel_from({0, 0, 0, 0, 1, 0, 0, 0, 0}, 3, 3);
  const auto out = conv2d_forward(img, k);
  CHECK(out.shape() == Shape{1, 4, 5});
  for (Index y = 0; y < 4; ++y) {
    for (Index x = 0; x < 5; ++x) {
      CHECK(out(0, y, x) == img(0, y + 1, x + 1));
    }
  }
}

TEST_CASE("conv2d box blur over an all-ones patch sums to one") {
  const Tensor<float> ones(Shape{1, 3, 3}, 1.0f);
  const auto k = kernel_from({1.f / 9, 1.f / 9, 1.f / 9, 1.f / 9, 1.f / 9,
                              1.f / 9, 1.f / 9, 1.f / 9, 1.f / 9},
                             3, 3);
  const auto out = conv2d_forward(ones, k);
  CHECK(out.shape() == Shape{1, 1, 1});
  CHECK(out[0] == doctest::Approx(1.0f).epsilon(1e-6));
}

TEST_CASE("conv2d rejects oversized kernels and channel mismatch") {
  const Tensor<float> input(Shape{1, 2, 2}, 1.0f);
  CHECK_THROWS_AS(conv2d_forward(input, KernelSpec<float>::zeros(1, 1, 3, 3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d_forward(input, KernelSpec<float>::zeros(2, 1, 2, 2)),
                  std::invalid_argument);
}

TEST_CASE("conv2d backward hand cases") {
  // Zero upstream -> all-zero gradients.
  RngState rng(3);
  const auto input = uniform<float>(Shape{2, 4, 4}, -1.0f, 1.0f, rng);
  KernelSpec<float> k = KernelSpec<float>::zeros(2, 3, 2, 2);
  k.weights = uniform<float>(k.weights.shape(), -1.0f, 1.0f, rng);
  const auto out = conv2d_forward(input, k);
  const auto g = conv2d_backward(Tensor<float>(out.shape()), input, k);
  CHECK((g.input_grad.array() == 0.0f).all());
  CHECK((g.weight_grad.array() == 0.0f).all());
  CHECK((g.bias_grad.array() == 0.0f).all());

  // 1x1 kernel on a single pixel: weight grad = input * upstream.
  const Tensor<float> px(Shape{1, 1, 1}, {2.5f});
  KernelSpec<float> k1 = KernelSpec<float>::zeros(1, 1, 1, 1);
  k1.weights[0] = 0.75f;
  const Tensor<float> up(Shape{1, 1, 1}, {3.0f});
  const auto g1 = conv2d_backward(up, px, k1);
  CHECK(g1.weight_grad[0] == 2.5f * 3.0f);
  CHECK(g1.input_grad[0] == 0.75f * 3.0f);
  CHECK(g1.bias_grad[0] == 3.0f);

  // Shape mismatch with the cache is rejected.
  CHECK_THROWS_AS(conv2d_backward(Tensor<float>(Shape{3, 9, 9}), input, k),
                  std::invalid_argument);
}

TEST_CASE("conv2d layer gradients agree with finite differences") {
  RngState rng(21);
  auto layer = Conv2dLayer<double>("conv", 2, 3, 3, 3);
  layer.kernel().weights =
      uniform<double>(layer.kernel().weights.shape(), -1.0, 1.0, rng);
  layer.kernel().bias =
      uniform<double>(layer.kernel().bias.shape(), -0.5, 0.5, rng);
  const auto input = uniform<double>(Shape{2, 6, 6}, -1.0, 1.0, rng);
  CHECK(test::probe_layer_gradients(layer, input, rng) < 1e-6);
}

TEST_CASE("relu forward and backward") {
  const Tensor<float> x(Shape{3}, {-1.0f, 0.0f, 2.0f});
  const auto y = relu(x);
  CHECK(y[0] == 0.0f);
  CHECK(y[1] == 0.0f);
  CHECK(y[2] == 2.0f);
  CHECK(relu(Tensor<float>(Shape{1}, {3.0f}))[0] == 3.0f);
  CHECK(relu(Tensor<float>(Shape{1}, {-2.0f}))[0] == 0.0f);

  // Idempotence.
  RngState rng(4);
  const auto r = uniform<float>(Shape{64}, -3.0f, 3.0f, rng);
  CHECK(bitwise_equal(relu(relu(r)), relu(r)));

  const Tensor<float> cached(Shape{2}, {-1.0f, 2.0f});
  const Tensor<float> up(Shape{2}, {5.0f, 7.0f});
  const auto g = relu_backward(up, cached);
  CHECK(g[0] == 0.0f);
  CHECK(g[1] == 7.0f);

  const auto all_pos = relu_backward(up, Tensor<float>(Shape{2}, 1.0f));
  CHECK(bitwise_equal(all_pos, up));
  const auto all_neg = relu_backward(up, Tensor<float>(Shape{2}, -1.0f));
  CHECK((all_neg.array() == 0.0f).all());

  CHECK_THROWS_AS(relu_backward(up, Tensor<float>(Shape{3}, 1.0f)),
                  std::invalid_argument);
}

TEST_CASE("pool forward on the 2x2 example") {
  const Tensor<float> x(Shape{1, 2, 2}, {1, 2, 3, 4});
  PoolSpec p{PoolMode::Max, 2, 2, 2};
  CHECK(pool_forward(x, p)[0] == 4.0f);
  p.mode = PoolMode::Average;
  CHECK(pool_forward(x, p)[0] == 2.5f);
  p.mode = PoolMode::Sum;
  CHECK(pool_forward(x, p)[0] == 10.0f);

  CHECK_THROWS_AS(pool_forward(x, PoolSpec{PoolMode::Max, 3, 3, 1}),
                  std::invalid_argument);
}

TEST_CASE("pool of a constant image") {
  const Tensor<float> c(Shape{1, 4, 4}, 7.0f);
  PoolSpec p{PoolMode::Max, 2, 2, 2};
  CHECK((pool_forward(c, p).array() == 7.0f).all());
  p.mode = PoolMode::Sum;
  CHECK((pool_forward(c, p).array() == 28.0f).all());
}

TEST_CASE("pool output extent uses the floor rule") {
  const Tensor<float> x(Shape{1, 13, 9}, 0.0f);
  const auto out = pool_forward(x, PoolSpec{PoolMode::Max, 2, 2, 2});
  CHECK(out.shape() == Shape{1, 6, 4});
}

TEST_CASE("pool backward routes per mode") {
  const Tensor<float> x(Shape{1, 2, 2}, {1, 2, 3, 4});
  PoolSpec p{PoolMode::Max, 2, 2, 2};
  const Tensor<float> up(Shape{1, 1, 1}, {1.0f});
  auto g = pool_backward(up, x, p);
  CHECK(g[0] == 0.0f);
  CHECK(g[1] == 0.0f);
  CHECK(g[2] == 0.0f);
  CHECK(g[3] == 1.0f);

  p.mode = PoolMode::Average;
  g = pool_backward(Tensor<float>(Shape{1, 1, 1}, {4.0f}), x, p);
  for (Index i = 0; i < 4; ++i) CHECK(g[i] == 1.0f);

  p.mode = PoolMode::Sum;
  g = pool_backward(Tensor<float>(Shape{1, 1, 1}, {2.5f}), x, p);
  for (Index i = 0; i < 4; ++i) CHECK(g[i] == 2.5f);

  CHECK_THROWS_AS(pool_backward(Tensor<float>(Shape{1, 2, 2}), x, p),
                  std::invalid_argument);
}

TEST_CASE("max pool gradient ties break to the first cell") {
  const Tensor<float> x(Shape{1, 2, 2}, 5.0f);
  const auto g = pool_backward(Tensor<float>(Shape{1, 1, 1}, {1.0f}), x,
                               PoolSpec{PoolMode::Max, 2, 2, 2});
  CHECK(g[0] == 1.0f);
  CHECK(g[1] == 0.0f);
}

TEST_CASE("overlapping pool windows accumulate additively") {
  RngState rng(6);
  auto layer = PoolLayer<double>("pool", PoolSpec{PoolMode::Sum, 2, 2, 1});
  const auto input = uniform<double>(Shape{1, 4, 4}, -1.0, 1.0, rng);
  CHECK(test::probe_layer_gradients(layer, input, rng) < 1e-6);
}

TEST_CASE("pool layer gradients per mode") {
  RngState rng(13);
  for (PoolMode mode : {PoolMode::Max, PoolMode::Average, PoolMode::Sum}) {
    auto layer = PoolLayer<double>("pool", PoolSpec{mode, 2, 2, 2});
    const auto input = uniform<double>(Shape{2, 6, 6}, -1.0, 1.0, rng);
    CHECK(test::probe_layer_gradients(layer, input, rng) < 1e-6);
  }
}

TEST_CASE("dense forward examples") {
  const Tensor<float> x(Shape{2}, {1, 1});
  const Tensor<float> w(Shape{1, 2}, {1, 2});
  const Tensor<float> b(Shape{1}, {3});
  CHECK(dense_forward(x, w, b)[0] == 6.0f);

  const auto eye = identity_matrix<float>(4);
  const Tensor<float> v(Shape{4}, {1, 2, 3, 4});
  CHECK(bitwise_equal(dense_forward(v, eye, Tensor<float>(Shape{4})), v));

  const Tensor<float> w4(Shape{4, 10}, 0.5f);
  CHECK(dense_forward(Tensor<float>(Shape{10}, 1.0f), w4,
                      Tensor<float>(Shape{4}))
            .shape() == Shape{4});

  CHECK_THROWS_AS(dense_forward(v, w, b), std::invalid_argument);
}

TEST_CASE("dense layer gradients agree with finite differences") {
  RngState rng(17);
  auto layer = DenseLayer<double>("fc", 6, 4);
  layer.weights() = uniform<double>(layer.weights().shape(), -1.0, 1.0, rng);
  layer.bias() = uniform<double>(layer.bias().shape(), -0.5, 0.5, rng);
  const auto input = uniform<double>(Shape{6}, -1.0, 1.0, rng);
  CHECK(test::probe_layer_gradients(layer, input, rng) < 1e-6);
}

TEST_CASE("flatten is row-major and count preserving") {
  const Tensor<float> x(Shape{2, 2}, {1, 2, 3, 4});
  const auto f = flatten(x);
  CHECK(f.shape() == Shape{4});
  for (Index i = 0; i < 4; ++i) CHECK(f[i] == x[i]);

  const Tensor<float> v(Shape{5}, 1.0f);
  CHECK(bitwise_equal(flatten(v), v));

  CHECK(flatten(Tensor<float>(Shape{2, 3, 4})).shape() == Shape{24});
}

TEST_CASE("softmax examples and laws") {
  const auto uniform4 = softmax(Tensor<float>(Shape{4}, 1.0f));
  for (Index i = 0; i < 4; ++i) {
    CHECK(uniform4[i] == doctest::Approx(0.25).epsilon(1e-6));
  }

  // [0, ln 3] -> [0.25, 0.75]
  const Tensor<float> logits(Shape{2}, {0.0f, std::log(3.0f)});
  const auto p = softmax(logits);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-6));

  RngState rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = uniform<float>(Shape{7}, -10.0f, 10.0f, rng);
    const auto y = softmax(z);
    CHECK(std::fabs(y.array().sum() - 1.0f) < 1e-6);
    for (Index i = 0; i < y.size(); ++i) {
      CHECK(y[i] > 0.0f);
      CHECK(y[i] <= 1.0f);
    }
    CHECK(argmax(y) == argmax(z));

    Tensor<float> shifted = z;
    shifted.array() += 100.0f;
    const auto y2 = softmax(shifted);
    for (Index i = 0; i < y.size(); ++i) {
      CHECK(y2[i] == doctest::Approx(y[i]).epsilon(1e-6));
    }
  }

  Tensor<float> bad(Shape{2}, {1.0f, std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(softmax(bad), std::invalid_argument);
}

TEST_CASE("softmax backward agrees with finite differences") {
  RngState rng(19);
  auto layer = SoftmaxLayer<double>("softmax");
  const auto input = uniform<double>(Shape{5}, -2.0, 2.0, rng);
  CHECK(test::probe_layer_gradients(layer, input, rng, 1e-6) < 1e-6);
}

TEST_CASE("rescale by 1/255") {
  const Tensor<float> px(Shape{3}, {255.0f, 0.0f, 128.0f});
  const auto out = rescale_forward(px, 1.0f / 255.0f);
  CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(out[1] == 0.0f);
  CHECK(out[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
  CHECK_THROWS_AS(rescale_forward(px, 0.0f), std::invalid_argument);
  CHECK_THROWS_AS(RescaleLayer<float>("r", -1.0f), std::invalid_argument);
}

TEST_CASE("conv2d output shape law over random kernel sizes") {
  RngState rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Index h = 1 + static_cast<Index>(rng.bounded(10));
    const Index w = 1 + static_cast<Index>(rng.bounded(10));
    const Index kh = 1 + static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(h)));
    const Index kw = 1 + static_cast<Index>(rng.bounded(static_cast<std::uint64_t>(w)));
    const Tensor<float> input(Shape{1, h, w}, 1.0f);
    const auto out =
        conv2d_forward(input, KernelSpec<float>::zeros(1, 1, kh, kw));
    CHECK(out.shape() == Shape{1, h - kh + 1, w - kw + 1});
  }
}

namespace {

// True convolution: flip the kernel 180 degrees, then cross-correlate.
Tensor<float> true_convolution(const Tensor<float>& input,
                               const KernelSpec<float>& k) {
  KernelSpec<float> flipped = k;
  for (Index oc = 0; oc < k.out_channels; ++oc) {
    for (Index ic = 0; ic < k.in_channels; ++ic) {
      for (Index y = 0; y < k.kernel_h; ++y) {
        for (Index x = 0; x < k.kernel_w; ++x) {
          flipped.weights(oc, ic, y, x) =
              k.weights(oc, ic, k.kernel_h - 1 - y, k.kernel_w - 1 - x);
        }
      }
    }
  }
  return conv2d_forward(input, flipped);
}

}  // namespace

TEST_CASE("cross-correlation equals true convolution for the filter bank") {
  // Every kernel in the standard bank is 180-degree rotation symmetric, so
  // the two orientations agree exactly.
  RngState rng(29);
  const auto img = uniform<float>(Shape{1, 8, 8}, 0.0f, 255.0f, rng);
  for (const FilterKernel& f : filter_bank()) {
    KernelSpec<float> k = KernelSpec<float>::zeros(1, 1, 3, 3);
    for (Index i = 0; i < 9; ++i) {
      k.weights[i] = static_cast<float>(f.coeffs[static_cast<std::size_t>(i)] *
                                        f.normalization);
    }
    CHECK(bitwise_equal(conv2d_forward(img, k), true_convolution(img, k)));
  }
}
