#include <cmath>
#include <doctest.h>

#include "cadnet/builders.hpp"
#include "cadnet/synthetic.hpp"
#include "cadnet/training.hpp"

using namespace cadnet;

namespace {

// Small conv stack for gradient and fit tests: [1,8,8] input, K classes.
ModelSpec tiny_conv_spec(Index k, Index size = 8) {
  ModelSpec spec;
  spec.name = "tiny";
  spec.input_shape = Shape{1, size, size};
  spec.num_classes = k;
  spec.layers = {
      LayerDesc::rescale("rescale", 1.0 / 255.0),
      LayerDesc::conv2d("conv1", 2, 3, 3),
      LayerDesc::relu("relu1"),
      LayerDesc::pool("pool1", PoolMode::Max, 2, 2),
      LayerDesc::flatten("flatten"),
      LayerDesc::dense("head", k),
      LayerDesc::softmax("softmax"),
  };
  return spec;
}

ModelSpec dense_only_spec(Index k) {
  ModelSpec spec;
  spec.name = "dense_only";
  spec.input_shape = Shape{1, 2, 2};
  spec.num_classes = k;
  spec.layers = {
      LayerDesc::rescale("rescale", 1.0 / 255.0),
      LayerDesc::flatten("flatten"),
      LayerDesc::dense("fc1", 5),
      LayerDesc::relu("fc1_relu"),
      LayerDesc::dense("head", k),
      LayerDesc::softmax("softmax"),
  };
  return spec;
}

}  // namespace

TEST_CASE("sparse cross-entropy loss values") {
  // Perfect prediction.
  const Tensor<float> onehot(Shape{3}, {0.0f, 1.0f, 0.0f});
  CHECK(sparse_ce_loss(onehot, 1) == 0.0f);

  // Uniform over 4 classes: ln 4.
  const Tensor<float> uniform4(Shape{4}, 0.25f);
  CHECK(sparse_ce_loss(uniform4, 2) ==
        doctest::Approx(1.3862943611).epsilon(1e-6));

  // -ln 0.75.
  const Tensor<float> p(Shape{2}, {0.25f, 0.75f});
  CHECK(sparse_ce_loss(p, 1) == doctest::Approx(0.2876820724).epsilon(1e-6));

  // Clamped at the floor instead of infinite.
  const Tensor<float> zero(Shape{2}, {1.0f, 0.0f});
  CHECK(std::isfinite(sparse_ce_loss(zero, 1)));
  CHECK(sparse_ce_loss(zero, 1) ==
        doctest::Approx(-std::log(1e-12)).epsilon(1e-6));

  CHECK(sparse_ce_loss(p, 0) >= 0.0f);
  CHECK_THROWS_AS(sparse_ce_loss(p, 2), std::out_of_range);
  CHECK_THROWS_AS(sparse_ce_loss(p, -1), std::out_of_range);
}

TEST_CASE("fused softmax cross-entropy gradient") {
  // Equal logits, K=2, label 0 -> [-0.5, 0.5].
  const Tensor<float> equal(Shape{2}, 1.0f);
  const auto g = sparse_ce_softmax_grad(equal, 0);
  CHECK(g[0] == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-6));

  // Confident and correct -> near zero.
  const Tensor<float> confident(Shape{2}, {20.0f, -20.0f});
  const auto gc = sparse_ce_softmax_grad(confident, 0);
  CHECK(std::fabs(gc[0]) < 1e-6);
  CHECK(std::fabs(gc[1]) < 1e-6);

  // Components always sum to zero.
  RngState rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const auto z = uniform<float>(Shape{6}, -8.0f, 8.0f, rng);
    const auto grad = sparse_ce_softmax_grad(z, static_cast<Index>(trial % 6));
    CHECK(std::fabs(grad.array().sum()) < 1e-6);
  }

  CHECK_THROWS_AS(sparse_ce_softmax_grad(equal, 5), std::out_of_range);
}

TEST_CASE("sgd step") {
  Tensor<float> theta(Shape{1}, {1.0f});
  sgd_step(theta, Tensor<float>(Shape{1}, {0.5f}), 0.1f);
  CHECK(theta[0] == doctest::Approx(0.95).epsilon(1e-7));

  Tensor<float> fixed(Shape{3}, 2.0f);
  const Tensor<float> before = fixed;
  sgd_step(fixed, Tensor<float>(Shape{3}, 0.0f), 0.1f);
  CHECK(bitwise_equal(fixed, before));

  // Two steps at lr equal one step at 2*lr for a constant gradient.
  const Tensor<float> g(Shape{2}, {0.3f, -0.7f});
  Tensor<float> a(Shape{2}, {1.0f, 1.0f});
  Tensor<float> b = a;
  sgd_step(a, g, 0.05f);
  sgd_step(a, g, 0.05f);
  sgd_step(b, g, 0.1f);
  for (Index i = 0; i < 2; ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-7));
  }

  CHECK_THROWS_AS(sgd_step(theta, Tensor<float>(Shape{2}), 0.1f),
                  std::invalid_argument);
}

TEST_CASE("adam zero-gradient fixed point") {
  AdamConfig cfg;
  Tensor<float> theta(Shape{4}, 1.25f);
  const Tensor<float> before = theta;
  auto state = AdamMoments<float>::zeros(theta.shape());
  adam_step(theta, Tensor<float>(theta.shape()), state, cfg);
  CHECK(bitwise_equal(theta, before));
  CHECK(state.step_count == 1);
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  AdamConfig cfg;  // lr 1e-3
  for (float g : {0.5f, -0.02f, 3.0f, -1e-3f}) {
    Tensor<float> theta(Shape{1}, {0.0f});
    auto state = AdamMoments<float>::zeros(theta.shape());
    adam_step(theta, Tensor<float>(Shape{1}, {g}), state, cfg);
    const double expected = -1e-3 * (g > 0 ? 1.0 : -1.0);
    CHECK(std::fabs(theta[0] - expected) < 1e-3 * 1e-4 + 1e-9);
  }
}

TEST_CASE("adam matches a standalone scalar reference over 5 steps") {
  // Independent reference: the published bias-corrected update, written out
  // in double, advanced by hand.
  const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double g = 0.3;
  double theta_ref = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    theta_ref -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  // Frozen expectation for the reference itself.
  CHECK(theta_ref == doctest::Approx(0.9950000001666667).epsilon(1e-12));

  AdamConfig cfg;
  Tensor<double> theta(Shape{1}, {1.0});
  auto state = AdamMoments<double>::zeros(theta.shape());
  for (int t = 0; t < 5; ++t) {
    adam_step(theta, Tensor<double>(Shape{1}, {g}), state, cfg);
  }
  CHECK(theta[0] == doctest::Approx(theta_ref).epsilon(1e-12));
  CHECK(state.step_count == 5);
}

TEST_CASE("finite difference check passes for a dense-only model") {
  RngState rng(41);
  auto model = build_model<float>(dense_only_spec(3), rng);
  const auto input = uniform<float>(Shape{1, 2, 2}, 0.0f, 255.0f, rng);
  CHECK(finite_diff_check(model, input, 1) < 1e-3);
}

TEST_CASE("finite difference check passes for a conv stack") {
  RngState rng(43);
  auto model = build_model<float>(tiny_conv_spec(3, 6), rng);
  const auto input = uniform<float>(Shape{1, 6, 6}, 0.0f, 255.0f, rng);
  CHECK(finite_diff_check(model, input, 2) < 1e-3);
}

TEST_CASE("finite difference check in double is much tighter") {
  RngState rng(47);
  auto model32 = build_model<float>(tiny_conv_spec(2, 6), rng);
  auto model64 = cast_model<double>(model32);
  const auto input = uniform<double>(Shape{1, 6, 6}, 0.0, 255.0, rng);
  CHECK(finite_diff_check(model64, input, 1) < 1e-6);
}

TEST_CASE("frozen layers report exactly zero analytic gradients") {
  RngState rng(53);
  auto model = build_model<float>(tiny_conv_spec(2, 6), rng);
  model.find_layer("conv1")->set_frozen(true);

  const auto input = uniform<float>(Shape{1, 6, 6}, 0.0f, 255.0f, rng);
  model.zero_grad();
  auto probs = model.forward(input);
  model.backward_from_logits(sparse_ce_grad_from_probs(probs, 0));
  for (const auto& ref : model.param_refs()) {
    if (ref.frozen) {
      CHECK((ref.grad->array() == 0.0f).all());
    }
  }
  // The oracle skips frozen parameters and still passes.
  CHECK(finite_diff_check(model, input, 0) < 1e-3);
}

TEST_CASE("fresh model loss is close to ln K") {
  RngState rng(59);
  const Index k = 4;
  auto model = build_model<float>(tiny_conv_spec(k), rng);
  double loss = 0.0;
  const int n = 24;
  for (int i = 0; i < n; ++i) {
    const auto x = uniform<float>(Shape{1, 8, 8}, 0.0f, 255.0f, rng);
    loss += static_cast<double>(
        sparse_ce_loss(model.forward(x), static_cast<Index>(rng.bounded(k))));
  }
  loss /= n;
  const double lnk = std::log(static_cast<double>(k));
  CHECK(loss > lnk * 0.85);
  CHECK(loss < lnk * 1.15);
}

TEST_CASE("fit with zero epochs changes nothing") {
  RngState data_rng(61);
  const auto ds = synth::make_dataset(
      {{"A", synth::Texture::VerticalStripes, 4},
       {"B", synth::Texture::HorizontalStripes, 4}},
      8, 8, data_rng);

  RngState rng(62);
  auto model = build_model<float>(tiny_conv_spec(2), rng);
  std::vector<Tensor<float>> before;
  for (auto& ref : model.param_refs()) before.push_back(*ref.value);

  FitOptions options;
  options.epochs = 0;
  RngState fit_rng(63);
  const TrainReport report = fit(model, ds, ds, options, fit_rng);
  CHECK(report.rows.empty());
  auto refs = model.param_refs();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CHECK(bitwise_equal(*refs[i].value, before[i]));
  }
}

TEST_CASE("fit is deterministic for a fixed seed") {
  RngState data_rng(71);
  const auto ds = synth::make_dataset(
      {{"A", synth::Texture::VerticalStripes, 6},
       {"B", synth::Texture::HorizontalStripes, 6}},
      8, 8, data_rng);

  FitOptions options;
  options.epochs = 3;
  options.batch_size = 4;

  auto run = [&]() {
    RngState init_rng(72);
    auto model = build_model<float>(tiny_conv_spec(2), init_rng);
    RngState fit_rng(73);
    fit(model, ds, ds, options, fit_rng);
    std::vector<Tensor<float>> weights;
    for (auto& ref : model.param_refs()) weights.push_back(*ref.value);
    return weights;
  };
  const auto w1 = run();
  const auto w2 = run();
  REQUIRE(w1.size() == w2.size());
  for (std::size_t i = 0; i < w1.size(); ++i) {
    CHECK(bitwise_equal(w1[i], w2[i]));
  }
}

TEST_CASE("fit leaves frozen layers bitwise unchanged") {
  RngState data_rng(81);
  const auto ds = synth::make_dataset(
      {{"A", synth::Texture::VerticalStripes, 6},
       {"B", synth::Texture::HorizontalStripes, 6}},
      8, 8, data_rng);

  RngState init_rng(82);
  auto model = build_model<float>(tiny_conv_spec(2), init_rng);
  model.find_layer("conv1")->set_frozen(true);
  const Tensor<float> conv_before =
      *model.find_layer("conv1")->parameters()[0];

  FitOptions options;
  options.epochs = 3;
  options.batch_size = 4;
  RngState fit_rng(83);
  fit(model, ds, ds, options, fit_rng);

  CHECK(bitwise_equal(*model.find_layer("conv1")->parameters()[0],
                      conv_before));
}

TEST_CASE("fit learns a separable toy problem") {
  RngState data_rng(91);
  const auto ds = synth::make_dataset(
      {{"A", synth::Texture::VerticalStripes, 8},
       {"B", synth::Texture::HorizontalStripes, 8}},
      24, 24, data_rng);

  RngState init_rng(92);
  auto model =
      build_model<float>(proposed_cnn_spec(Shape{1, 24, 24}, 2), init_rng);
  FitOptions options;
  options.epochs = 30;
  options.batch_size = 8;
  RngState fit_rng(93);
  const TrainReport report = fit(model, ds, ds, options, fit_rng);
  REQUIRE(report.rows.size() == 30);
  CHECK(report.rows.front().epoch == 1);
  CHECK(report.rows.back().epoch == 30);
  CHECK(report.rows.back().train_acc == 1.0);
  CHECK(report.rows.back().train_loss < report.rows.front().train_loss);
}

TEST_CASE("train report serialization") {
  TrainReport report;
  report.rows.push_back({1, 0.5, 0.75, 0.6, 0.7, 1.25});
  report.rows.push_back({2, 0.25, 1.0, 0.5, 0.8, 1.5});

  const std::string csv = report_to_csv(report);
  CHECK(csv.find("epoch,train_loss,train_acc,val_loss,val_acc,seconds\n") == 0);
  CHECK(csv.find("1,0.5,0.75,0.6,0.7,1.25\n") != std::string::npos);
  CHECK(csv.find("2,0.25,1,0.5,0.8,1.5\n") != std::string::npos);

  const auto j = nlohmann::json::parse(report_to_json(report));
  REQUIRE(j.at("epochs").size() == 2);
  CHECK(j.at("epochs")[0].at("epoch") == 1);
  CHECK(j.at("epochs")[1].at("train_acc") == 1.0);
  CHECK(j.at("epochs")[0].contains("seconds"));
}

TEST_CASE("fit rejects out-of-range labels and empty data") {
  RngState data_rng(95);
  const auto ds = synth::make_dataset(
      {{"A", synth::Texture::VerticalStripes, 2},
       {"B", synth::Texture::HorizontalStripes, 2},
       {"C", synth::Texture::Checkerboard, 2}},
      8, 8, data_rng);

  RngState rng(96);
  auto two_class = build_model<float>(tiny_conv_spec(2), rng);
  FitOptions options;
  options.epochs = 1;
  RngState fit_rng(97);
  CHECK_THROWS_AS(fit(two_class, ds, ds, options, fit_rng), DataError);

  const LabeledDataset empty(ds.labels(), {});
  auto three_class = build_model<float>(tiny_conv_spec(3), rng);
  CHECK_THROWS_AS(fit(three_class, empty, empty, options, fit_rng), DataError);
}
