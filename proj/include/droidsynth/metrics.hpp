#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>

#include <json.hpp>

namespace droidsynth {

// Label 1 (malware) is the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Throws DataError on a length mismatch or a value outside {0,1}.
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred);

struct BasicMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
  // Metrics whose denominator was zero; they are reported as 0.
  std::set<std::string> undefined;
};

// Throws DataError on an empty matrix.
BasicMetrics basic_metrics(const ConfusionMatrix& cm);

// Normalized Mann-Whitney statistic: share of (positive, negative) pairs where
// the positive scores higher, ties counting one half. Throws DataError naming
// roc_auc when only one class is present.
double roc_auc(std::span<const double> scores, std::span<const int> y_true);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap of accuracy over (truth, prediction) pairs resampled
// with replacement. Percentiles interpolate linearly between order
// statistics. The interval is widened to include the observed accuracy if the
// resampled percentiles miss it.
Interval bootstrap_ci(std::span<const int> y_true, std::span<const int> y_pred,
                      int resamples = 1000, std::uint64_t seed = 0, double level = 0.95);

struct MetricSet {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double roc_auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::set<std::string> undefined;

  nlohmann::json to_json() const;
};

// Everything reported for one evaluated split. An AUC that cannot be computed
// (single class) is reported as 0 and flagged roc_auc.
MetricSet evaluate_predictions(std::span<const int> y_true, std::span<const int> y_pred,
                               std::span<const double> scores, std::uint64_t seed,
                               int resamples = 1000);

}  // namespace droidsynth
