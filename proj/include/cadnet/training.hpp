#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cadnet/dataset.hpp"
#include "cadnet/errors.hpp"
#include "cadnet/model.hpp"
#include "cadnet/rng.hpp"
#include "cadnet/tensor.hpp"

namespace cadnet {

/// Probabilities below this are clamped before the log, so the loss stays
/// finite even on a fully confident wrong prediction.
inline constexpr double kLossProbFloor = 1e-12;

/// -ln(probs[label]) for a probability vector (softmax output).
template <typename Scalar>
Scalar sparse_ce_loss(const Tensor<Scalar>& probs, Index label) {
  if (probs.rank() != 1) {
    throw std::invalid_argument("sparse_ce_loss: rank-1 probabilities required");
  }
  if (label < 0 || label >= probs.size()) {
    throw std::out_of_range("sparse_ce_loss: label " + std::to_string(label) +
                            " out of range for " + std::to_string(probs.size()) +
                            " classes");
  }
  const Scalar p = std::max(probs[label], Scalar(kLossProbFloor));
  return -std::log(p);
}

/// Fused gradient of sparse cross-entropy w.r.t. the logits feeding softmax:
/// softmax(logits) - onehot(label). Components sum to zero.
template <typename Scalar>
Tensor<Scalar> sparse_ce_softmax_grad(const Tensor<Scalar>& logits,
                                      Index label) {
  Tensor<Scalar> g = softmax(logits);
  if (label < 0 || label >= g.size()) {
    throw std::out_of_range("sparse_ce_softmax_grad: label out of range");
  }
  g[label] -= Scalar(1);
  return g;
}

/// Same fused gradient when the softmax output is already at hand.
template <typename Scalar>
Tensor<Scalar> sparse_ce_grad_from_probs(const Tensor<Scalar>& probs,
                                         Index label) {
  if (label < 0 || label >= probs.size()) {
    throw std::out_of_range("sparse_ce_grad_from_probs: label out of range");
  }
  Tensor<Scalar> g = probs;
  g[label] -= Scalar(1);
  return g;
}

/// In-place param -= learning_rate * grad.
template <typename Scalar>
void sgd_step(Tensor<Scalar>& param, const Tensor<Scalar>& grad,
              Scalar learning_rate) {
  if (param.shape() != grad.shape()) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  if (!(learning_rate > Scalar(0))) {
    throw std::invalid_argument("sgd_step: learning_rate must be > 0");
  }
  param.array() -= learning_rate * grad.array();
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter Adam state: first/second moment tensors mirroring the
/// parameter shape, plus the applied-step count.
template <typename Scalar>
struct AdamMoments {
  Tensor<Scalar> m;
  Tensor<Scalar> v;
  std::int64_t step_count = 0;

  static AdamMoments zeros(const Shape& shape) {
    AdamMoments s;
    s.m = Tensor<Scalar>(shape);
    s.v = Tensor<Scalar>(shape);
    return s;
  }
};

/// One bias-corrected Adam update, in place. Advances state.step_count.
template <typename Scalar>
void adam_step(Tensor<Scalar>& param, const Tensor<Scalar>& grad,
               AdamMoments<Scalar>& state, const AdamConfig& cfg) {
  if (param.shape() != grad.shape()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (state.m.shape() != param.shape() || state.v.shape() != param.shape()) {
    throw std::invalid_argument("adam_step: moment shapes do not mirror param");
  }
  const Scalar b1 = Scalar(cfg.beta1);
  const Scalar b2 = Scalar(cfg.beta2);
  state.step_count += 1;
  state.m.array() = b1 * state.m.array() + (Scalar(1) - b1) * grad.array();
  state.v.array() =
      b2 * state.v.array() + (Scalar(1) - b2) * grad.array().square();
  const Scalar bc1 =
      Scalar(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count)));
  const Scalar bc2 =
      Scalar(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count)));
  param.array() -= Scalar(cfg.learning_rate) * (state.m.array() / bc1) /
                   ((state.v.array() / bc2).sqrt() + Scalar(cfg.epsilon));
}

enum class OptimizerKind { Adam, Sgd };

inline std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "sgd";
}
inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw std::invalid_argument("unknown optimizer: " + std::string(s));
}

/// Per-epoch training record. Wall-clock seconds are informational only and
/// carry no reproducibility contract.
struct EpochRow {
  int epoch = 0;  // 1-based, contiguous
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRow> rows;
};

std::string report_to_csv(const TrainReport& report);
std::string report_to_json(const TrainReport& report);

struct FitOptions {
  Index epochs = 70;
  Index batch_size = 128;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

namespace detail {

template <typename Scalar>
struct SampleCache {
  std::vector<Tensor<Scalar>> inputs;
  std::vector<Index> labels;
};

template <typename Scalar>
SampleCache<Scalar> cache_samples(const LabeledDataset& ds,
                                  const Shape& input_shape, Index num_classes,
                                  const char* which) {
  SampleCache<Scalar> cache;
  cache.inputs.reserve(ds.size());
  cache.labels.reserve(ds.size());
  for (Index i = 0; i < ds.size(); ++i) {
    const Sample& s = ds.sample(i);
    if (s.label < 0 || s.label >= num_classes) {
      throw DataError(std::string(which) + " sample " + std::to_string(i) +
                      ": label " + std::to_string(s.label) +
                      " out of range for " + std::to_string(num_classes) +
                      "-class model");
    }
    Tensor<float> as_float = image_to_tensor(
        s.image, input_shape.dim(0), input_shape.dim(1), input_shape.dim(2));
    if constexpr (std::is_same_v<Scalar, float>) {
      cache.inputs.push_back(std::move(as_float));
    } else {
      Tensor<Scalar> converted(as_float.shape());
      for (Index j = 0; j < as_float.size(); ++j) {
        converted[j] = Scalar(as_float[j]);
      }
      cache.inputs.push_back(std::move(converted));
    }
    cache.labels.push_back(s.label);
  }
  return cache;
}

/// Seeded Fisher-Yates shuffle.
inline void shuffle_indices(std::vector<Index>& idx, RngState& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(i)));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace detail

/// Runs the epoch loop: seeded shuffle, mini-batches of batch_size (final
/// partial batch kept), gradients averaged over the batch, optimizer applied
/// to all non-frozen parameters, validation evaluated after each update
/// pass. Single-threaded and bit-reproducible for a fixed seed.
template <typename Scalar>
TrainReport fit(Model<Scalar>& model, const LabeledDataset& train,
                const LabeledDataset& val, const FitOptions& options,
                RngState& rng) {
  if (train.size() == 0) throw DataError("fit: empty training dataset");
  if (options.batch_size < 1) {
    throw std::invalid_argument("fit: batch_size must be >= 1");
  }
  if (options.epochs < 0) {
    throw std::invalid_argument("fit: epochs must be >= 0");
  }

  const Shape& in_shape = model.input_shape();
  const Index k = model.num_classes();
  auto train_cache = detail::cache_samples<Scalar>(train, in_shape, k, "train");
  auto val_cache = detail::cache_samples<Scalar>(val, in_shape, k, "val");

  auto refs = model.param_refs();
  AdamConfig adam_cfg{options.learning_rate, options.adam_beta1,
                      options.adam_beta2, options.adam_epsilon};
  std::vector<AdamMoments<Scalar>> moments;
  if (options.optimizer == OptimizerKind::Adam) {
    moments.reserve(refs.size());
    for (const auto& r : refs) {
      moments.push_back(AdamMoments<Scalar>::zeros(r.value->shape()));
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(train.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<Index>(i);
  }

  TrainReport report;
  for (Index epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::shuffle_indices(order, rng);

    double loss_sum = 0.0;
    Index correct = 0;
    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end =
          std::min(pos + static_cast<std::size_t>(options.batch_size),
                   order.size());
      const Index batch_count = static_cast<Index>(batch_end - pos);
      model.zero_grad();
      for (std::size_t b = pos; b < batch_end; ++b) {
        const Index i = order[b];
        const Tensor<Scalar>& x = train_cache.inputs[static_cast<std::size_t>(i)];
        const Index y = train_cache.labels[static_cast<std::size_t>(i)];
        Tensor<Scalar> probs = model.forward(x);
        loss_sum += static_cast<double>(sparse_ce_loss(probs, y));
        if (argmax(probs) == y) ++correct;
        model.backward_from_logits(sparse_ce_grad_from_probs(probs, y));
      }
      // Mean gradient over the batch, then one optimizer step.
      const Scalar inv = Scalar(1) / Scalar(batch_count);
      for (auto& r : refs) r.grad->array() *= inv;
      for (std::size_t p = 0; p < refs.size(); ++p) {
        if (refs[p].frozen) continue;
        if (options.optimizer == OptimizerKind::Adam) {
          adam_step(*refs[p].value, *refs[p].grad, moments[p], adam_cfg);
        } else {
          sgd_step(*refs[p].value, *refs[p].grad,
                   Scalar(options.learning_rate));
        }
      }
      pos = batch_end;
    }

    double val_loss = 0.0;
    Index val_correct = 0;
    for (std::size_t i = 0; i < val_cache.inputs.size(); ++i) {
      Tensor<Scalar> probs = model.forward(val_cache.inputs[i]);
      val_loss += static_cast<double>(sparse_ce_loss(probs, val_cache.labels[i]));
      if (argmax(probs) == val_cache.labels[i]) ++val_correct;
    }

    EpochRow row;
    row.epoch = static_cast<int>(epoch);
    row.train_loss = loss_sum / static_cast<double>(train.size());
    row.train_acc =
        static_cast<double>(correct) / static_cast<double>(train.size());
    if (!val_cache.inputs.empty()) {
      row.val_loss = val_loss / static_cast<double>(val_cache.inputs.size());
      row.val_acc = static_cast<double>(val_correct) /
                    static_cast<double>(val_cache.inputs.size());
    }
    row.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    report.rows.push_back(row);
  }
  return report;
}

namespace detail {

inline double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace detail

/// Default central-difference step per scalar width.
template <typename Scalar>
constexpr Scalar default_fd_step() {
  if constexpr (std::is_same_v<Scalar, float>) {
    return Scalar(1e-3);
  } else {
    return Scalar(1e-5);
  }
}

namespace detail {

/// Richardson-refined central difference with step control. The quotients at
/// h and h/2 are combined to cancel the O(h^2) truncation term; when they
/// disagree beyond what smooth truncation allows (the +-h window straddles a
/// relu or max-pool kink), the step shrinks and the estimate is retried, so
/// the oracle measures the one-sided slope the analytic gradient is defined
/// on.
template <typename F>
long double central_difference(F&& loss_with, long double h) {
  long double estimate = 0.0L;
  for (int level = 0;; ++level) {
    const long double d_h = (loss_with(h) - loss_with(-h)) / (2.0L * h);
    const long double d_half = (loss_with(h / 2) - loss_with(-h / 2)) / h;
    estimate = (4.0L * d_half - d_h) / 3.0L;
    const long double scale =
        std::max({std::fabs((double)d_h), std::fabs((double)d_half), 1e-8});
    if (std::fabs(static_cast<double>(d_h - d_half)) <= 1e-4 * scale ||
        level >= 4) {
      return estimate;
    }
    h /= 8.0L;
  }
}

}  // namespace detail

/// Central-difference oracle for the whole backward path: compares the
/// analytic gradient of the cross-entropy loss w.r.t. every non-frozen
/// parameter and the input against the central difference of the loss at
/// step h. Returns the worst relative error, with denominator
/// max(|analytic|, |numeric|, 1e-8).
///
/// The difference quotients are evaluated on an extended-precision clone of
/// the model with one Richardson refinement, putting the oracle's own error
/// near 1e-14 — far below both tolerances — so what is measured is the
/// accuracy of the Scalar-typed backward pass, not noise in the quotient.
/// Frozen layers must report exactly-zero analytic parameter gradients and
/// are excluded from the comparison.
template <typename Scalar>
double finite_diff_check(Model<Scalar>& model, const Tensor<Scalar>& input,
                         Index label, Scalar h = default_fd_step<Scalar>()) {
  if (!(h > Scalar(0))) {
    throw std::invalid_argument("finite_diff_check: h must be > 0");
  }

  model.zero_grad();
  Tensor<Scalar> probs = model.forward(input);
  if (!std::isfinite(static_cast<double>(sparse_ce_loss(probs, label)))) {
    throw std::runtime_error("finite_diff_check: non-finite loss");
  }
  Tensor<Scalar> input_grad =
      model.backward_from_logits(sparse_ce_grad_from_probs(probs, label));

  auto refs = model.param_refs();
  std::vector<Tensor<Scalar>> analytic;
  analytic.reserve(refs.size());
  for (auto& r : refs) analytic.push_back(*r.grad);

  using Wide = long double;
  Model<Wide> probe = cast_model<Wide>(model);
  auto probe_refs = probe.param_refs();
  Tensor<Wide> x(input.shape());
  for (Index i = 0; i < input.size(); ++i) {
    x[i] = static_cast<Wide>(input[i]);
  }
  const Wide step = static_cast<Wide>(h);
  const auto loss_now = [&]() {
    const Wide loss = sparse_ce_loss(probe.forward(x), label);
    if (!std::isfinite(static_cast<double>(loss))) {
      throw std::runtime_error("finite_diff_check: non-finite loss");
    }
    return loss;
  };

  double worst = 0.0;
  auto compare_scalar = [&](Wide& theta, double analytic_value) {
    const Wide saved = theta;
    const long double numeric = detail::central_difference(
        [&](long double offset) {
          theta = saved + offset;
          const Wide loss = loss_now();
          theta = saved;
          return loss;
        },
        step);
    worst = std::max(worst, detail::relative_error(
                                analytic_value, static_cast<double>(numeric)));
  };

  for (std::size_t p = 0; p < refs.size(); ++p) {
    if (refs[p].frozen) {
      for (Index i = 0; i < analytic[p].size(); ++i) {
        if (analytic[p][i] != Scalar(0)) {
          throw std::logic_error("finite_diff_check: frozen layer '" +
                                 refs[p].owner->name() +
                                 "' accumulated a nonzero gradient");
        }
      }
      continue;
    }
    Tensor<Wide>& theta = *probe_refs[p].value;
    for (Index i = 0; i < theta.size(); ++i) {
      compare_scalar(theta[i], static_cast<double>(analytic[p][i]));
    }
  }
  for (Index i = 0; i < x.size(); ++i) {
    compare_scalar(x[i], static_cast<double>(input_grad[i]));
  }
  return worst;
}

}  // namespace cadnet
