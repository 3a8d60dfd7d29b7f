#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadnet/dataset.hpp"
#include "cadnet/model.hpp"
#include "cadnet/tensor.hpp"

namespace cadnet {

/// K x K count grid; rows are actual classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(Index k);

  Index num_classes() const { return k_; }
  std::int64_t at(Index actual, Index predicted) const;
  void add(Index actual, Index predicted, std::int64_t count = 1);

  std::int64_t total() const;
  std::int64_t trace() const;

  /// Entrywise addition; associative, for combining partial tallies.
  void merge(const ConfusionMatrix& other);

 private:
  Index k_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const Index> predicted,
                                 std::span<const Index> actual, Index k);

/// One-vs-rest measures for a single class. Ratios with zero denominators
/// are reported as the undefined marker (nullopt), never a crash; they
/// serialize as null.
struct ClassMetrics {
  std::string class_name;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> f_measure;
};

struct MetricsReport {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> f_measure;
  std::vector<ClassMetrics> per_class;
};

/// The five binary measures with the given class treated as positive:
/// accuracy (TP+TN)/total, sensitivity TP/(TP+FN), specificity TN/(TN+FP),
/// precision TP/(TP+FP), F = 2PR/(P+R).
MetricsReport binary_metrics(const ConfusionMatrix& cm, Index positive_class);

/// Multiclass extension: every class is scored one-vs-rest and the defined
/// per-class values are averaged (macro averaging — a chosen convention, not
/// part of the binary definitions). Accuracy is trace/total.
MetricsReport macro_metrics(const ConfusionMatrix& cm);

/// Aligned integer grid with class-name headers.
std::string format_confusion(const ConfusionMatrix& cm, const LabelMap& labels);

nlohmann::json metrics_to_json(const MetricsReport& report);
std::string metrics_to_csv(const MetricsReport& report);

/// Runs the model over every sample in order (predicted class = argmax of
/// the probability vector) and tallies actual vs predicted.
template <typename Scalar>
std::pair<ConfusionMatrix, MetricsReport> evaluate(Model<Scalar>& model,
                                                   const LabeledDataset& ds) {
  const Index k = model.num_classes();
  if (ds.labels().size() != k) {
    throw DataError("evaluate: model has " + std::to_string(k) +
                    " classes, dataset has " +
                    std::to_string(ds.labels().size()));
  }
  ConfusionMatrix cm(k);
  const Shape& in_shape = model.input_shape();
  for (Index i = 0; i < ds.size(); ++i) {
    const Sample& s = ds.sample(i);
    Tensor<float> as_float = image_to_tensor(
        s.image, in_shape.dim(0), in_shape.dim(1), in_shape.dim(2));
    Tensor<Scalar> x;
    if constexpr (std::is_same_v<Scalar, float>) {
      x = std::move(as_float);
    } else {
      x = Tensor<Scalar>(as_float.shape());
      for (Index j = 0; j < as_float.size(); ++j) x[j] = Scalar(as_float[j]);
    }
    const Index predicted = argmax(model.forward(x));
    cm.add(s.label, predicted);
  }
  MetricsReport report = macro_metrics(cm);
  for (Index c = 0; c < k; ++c) {
    report.per_class[static_cast<std::size_t>(c)].class_name =
        ds.labels().name(c);
  }
  return {std::move(cm), std::move(report)};
}

}  // namespace cadnet
