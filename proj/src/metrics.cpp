#include "cadnet/metrics.hpp"

#include <algorithm>
#include <sstream>

#include "cadnet/errors.hpp"

namespace cadnet {

ConfusionMatrix::ConfusionMatrix(Index k) : k_(k) {
  if (k < 1) throw std::invalid_argument("ConfusionMatrix: k must be >= 1");
  counts_.assign(static_cast<std::size_t>(k * k), 0);
}

std::int64_t ConfusionMatrix::at(Index actual, Index predicted) const {
  if (actual < 0 || actual >= k_ || predicted < 0 || predicted >= k_) {
    throw std::out_of_range("ConfusionMatrix: index out of range");
  }
  return counts_[static_cast<std::size_t>(actual * k_ + predicted)];
}

void ConfusionMatrix::add(Index actual, Index predicted, std::int64_t count) {
  if (actual < 0 || actual >= k_ || predicted < 0 || predicted >= k_) {
    throw std::out_of_range("ConfusionMatrix: index out of range");
  }
  counts_[static_cast<std::size_t>(actual * k_ + predicted)] += count;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (std::int64_t c : counts_) sum += c;
  return sum;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t sum = 0;
  for (Index i = 0; i < k_; ++i) {
    sum += counts_[static_cast<std::size_t>(i * k_ + i)];
  }
  return sum;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) {
    throw std::invalid_argument("ConfusionMatrix: merge size mismatch");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
  }
}

ConfusionMatrix confusion_matrix(std::span<const Index> predicted,
                                 std::span<const Index> actual, Index k) {
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument("confusion_matrix: length mismatch (" +
                                std::to_string(predicted.size()) + " vs " +
                                std::to_string(actual.size()) + ")");
  }
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    cm.add(actual[i], predicted[i]);
  }
  return cm;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;  // undefined marker, not a crash
  return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> f_measure_of(std::optional<double> precision,
                                   std::optional<double> recall) {
  if (!precision || !recall) return std::nullopt;
  const double sum = *precision + *recall;
  if (sum == 0.0) return std::nullopt;
  return 2.0 * (*precision) * (*recall) / sum;
}

ClassMetrics one_vs_rest(const ConfusionMatrix& cm, Index positive) {
  const Index k = cm.num_classes();
  std::int64_t tp = 0, fn = 0, fp = 0, tn = 0;
  for (Index a = 0; a < k; ++a) {
    for (Index p = 0; p < k; ++p) {
      const std::int64_t n = cm.at(a, p);
      if (a == positive && p == positive) {
        tp += n;
      } else if (a == positive) {
        fn += n;
      } else if (p == positive) {
        fp += n;
      } else {
        tn += n;
      }
    }
  }
  ClassMetrics m;
  m.sensitivity = ratio(tp, tp + fn);
  m.specificity = ratio(tn, tn + fp);
  m.precision = ratio(tp, tp + fp);
  m.f_measure = f_measure_of(m.precision, m.sensitivity);
  return m;
}

std::optional<double> mean_of_defined(
    const std::vector<ClassMetrics>& per_class,
    std::optional<double> ClassMetrics::*field) {
  double sum = 0.0;
  int defined = 0;
  for (const ClassMetrics& m : per_class) {
    if (m.*field) {
      sum += *(m.*field);
      ++defined;
    }
  }
  if (defined == 0) return std::nullopt;
  return sum / defined;
}

}  // namespace

MetricsReport binary_metrics(const ConfusionMatrix& cm, Index positive_class) {
  if (cm.num_classes() != 2) {
    throw std::invalid_argument("binary_metrics: confusion matrix must be 2x2");
  }
  if (positive_class < 0 || positive_class > 1) {
    throw std::invalid_argument("binary_metrics: positive class must be 0 or 1");
  }
  ClassMetrics m = one_vs_rest(cm, positive_class);
  MetricsReport report;
  report.accuracy = ratio(cm.trace(), cm.total());
  report.sensitivity = m.sensitivity;
  report.specificity = m.specificity;
  report.precision = m.precision;
  report.f_measure = m.f_measure;
  report.per_class = {one_vs_rest(cm, 0), one_vs_rest(cm, 1)};
  return report;
}

MetricsReport macro_metrics(const ConfusionMatrix& cm) {
  if (cm.num_classes() < 2) {
    throw std::invalid_argument("macro_metrics: need at least 2 classes");
  }
  MetricsReport report;
  report.accuracy = ratio(cm.trace(), cm.total());
  for (Index c = 0; c < cm.num_classes(); ++c) {
    report.per_class.push_back(one_vs_rest(cm, c));
  }
  report.sensitivity =
      mean_of_defined(report.per_class, &ClassMetrics::sensitivity);
  report.specificity =
      mean_of_defined(report.per_class, &ClassMetrics::specificity);
  report.precision = mean_of_defined(report.per_class, &ClassMetrics::precision);
  report.f_measure = mean_of_defined(report.per_class, &ClassMetrics::f_measure);
  return report;
}

std::string format_confusion(const ConfusionMatrix& cm,
                             const LabelMap& labels) {
  const Index k = cm.num_classes();
  if (labels.size() != k) {
    throw std::invalid_argument("format_confusion: label count mismatch");
  }
  std::size_t name_width = std::string("actual \\ predicted").size();
  for (const std::string& n : labels.names()) {
    name_width = std::max(name_width, n.size());
  }
  std::vector<std::size_t> col_width(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c) {
    std::size_t w = labels.name(c).size();
    for (Index a = 0; a < k; ++a) {
      w = std::max(w, std::to_string(cm.at(a, c)).size());
    }
    col_width[static_cast<std::size_t>(c)] = w;
  }
  std::ostringstream out;
  const std::string corner = "actual \\ predicted";
  out << corner << std::string(name_width - corner.size(), ' ') << "  ";
  for (Index c = 0; c < k; ++c) {
    const std::string& n = labels.name(c);
    out << std::string(col_width[static_cast<std::size_t>(c)] - n.size(), ' ')
        << n << (c + 1 < k ? "  " : "");
  }
  out << "\n";
  for (Index a = 0; a < k; ++a) {
    const std::string& n = labels.name(a);
    out << n << std::string(name_width - n.size(), ' ') << "  ";
    for (Index c = 0; c < k; ++c) {
      const std::string v = std::to_string(cm.at(a, c));
      out << std::string(col_width[static_cast<std::size_t>(c)] - v.size(), ' ')
          << v << (c + 1 < k ? "  " : "");
    }
    out << "\n";
  }
  return out.str();
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["accuracy"] = opt_json(report.accuracy);
  j["sensitivity"] = opt_json(report.sensitivity);
  j["specificity"] = opt_json(report.specificity);
  j["precision"] = opt_json(report.precision);
  j["f_measure"] = opt_json(report.f_measure);
  j["per_class"] = nlohmann::json::array();
  for (const ClassMetrics& m : report.per_class) {
    nlohmann::json c;
    c["class"] = m.class_name;
    c["sensitivity"] = opt_json(m.sensitivity);
    c["specificity"] = opt_json(m.specificity);
    c["precision"] = opt_json(m.precision);
    c["f_measure"] = opt_json(m.f_measure);
    j["per_class"].push_back(std::move(c));
  }
  return j;
}

namespace {

std::string csv_cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(9);
  s << *v;
  return s.str();
}

}  // namespace

std::string metrics_to_csv(const MetricsReport& report) {
  std::string out =
      "scope,accuracy,sensitivity,specificity,precision,f_measure\n";
  out += "aggregate," + csv_cell(report.accuracy) + "," +
         csv_cell(report.sensitivity) + "," + csv_cell(report.specificity) +
         "," + csv_cell(report.precision) + "," + csv_cell(report.f_measure) +
         "\n";
  for (const ClassMetrics& m : report.per_class) {
    out += m.class_name + ",," + csv_cell(m.sensitivity) + "," +
           csv_cell(m.specificity) + "," + csv_cell(m.precision) + "," +
           csv_cell(m.f_measure) + "\n";
  }
  return out;
}

}  // namespace cadnet
