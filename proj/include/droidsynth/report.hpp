#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "droidsynth/metrics.hpp"
#include "droidsynth/models/classifier.hpp"
#include "droidsynth/scenarios.hpp"

namespace droidsynth {

struct ReportCell {
  std::string family;
  ScenarioKind scenario = ScenarioKind::real_only;
  models::ClassifierKind classifier = models::ClassifierKind::knn;
  std::string params;  // selected hyperparameters, ClassifierSpec::describe form
  double cv_accuracy = 0.0;
  std::optional<MetricSet> val_metrics;  // required for synth_to_real
  MetricSet test_metrics;

  nlohmann::json to_json() const;
  static ReportCell from_json(const nlohmann::json& j);
};

// "Locker/SLocker" -> "locker_slocker": lowercase alphanumerics, every other
// run of characters collapsed to one underscore.
std::string family_slug(std::string_view family);

// Table row labels in output order.
inline constexpr std::string_view kMetricRows[] = {
    "Accuracy", "ROC AUC", "Precision", "Recall", "F1 Score", "False Positive Rate", "95% CI"};

struct ReportFiles {
  std::vector<std::string> tables;
  std::vector<std::string> confusions;
  std::vector<std::string> charts;
  std::string aggregate;
};

// Writes into out_dir (created if needed), cells sorted by family, classifier,
// scenario:
//   table_{family}_{classifier}.csv        metric rows x scenario columns
//   confusion_{family}_{classifier}_{scenario}.csv
//   chart_{family}.csv and chart_{family}.svg (test accuracy bars)
//   aggregate.jsonl                         one record per cell
// Throws DataError when the directory cannot be written, a synth_to_real cell
// lacks validation metrics, or two cells share a (family, classifier,
// scenario) key.
ReportFiles emit_report(std::vector<ReportCell> cells, const std::string& out_dir);

std::vector<ReportCell> read_aggregate(const std::string& path);

}  // namespace droidsynth
