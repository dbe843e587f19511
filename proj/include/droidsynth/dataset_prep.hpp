#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace droidsynth {

enum class ColumnRole { excluded_metadata, imputed_count, numeric_feature };

struct Column {
  std::string name;
  ColumnRole role = ColumnRole::numeric_feature;
};

// Identifier and metadata columns removed before training.
inline constexpr std::array<std::string_view, 10> kExcludedMetadataColumns = {
    "Malware",  "Detection_Ratio", "MalFamily", "Scanners",        "TimesSubmitted",
    "NrContactedIps", "Package",   "sha256",    "EarliestModDate", "HighestModDate"};

// Component-count columns where the literal "None" means zero invocations.
inline constexpr std::array<std::string_view, 9> kImputedCountColumns = {
    "Activities",      "NrIntServices",         "NrIntServicesActions",
    "NrIntActivities", "NrIntActivitiesActions", "NrIntReceivers",
    "NrIntReceiversActions", "TotalIntentFilters", "NrServices"};

inline constexpr std::string_view kLabelColumn = "Malware";
inline constexpr std::string_view kFamilyColumn = "MalFamily";

// Published column counts of the real-device table.
inline constexpr std::size_t kPublishedHeaderColumns = 484;
inline constexpr std::size_t kPublishedColumnsAfterExclusion = 474;
inline constexpr std::size_t kPublishedColumnsAfterFilter = 387;

class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Throws DataError on duplicate names.
  explicit FeatureSchema(std::vector<Column> columns,
                         std::string family_tag_column = std::string(kFamilyColumn));

  // Roles come from the exclusion and imputation lists; everything else is a
  // numeric feature.
  static FeatureSchema from_header(const std::vector<std::string>& names);

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }
  std::vector<std::string> names() const;
  std::size_t count(ColumnRole role) const;
  const std::string& family_tag_column() const { return family_tag_column_; }

  bool operator==(const FeatureSchema& other) const;

 private:
  std::vector<Column> columns_;
  std::string family_tag_column_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Cell = std::variant<std::string, double>;

// Rows of raw cells plus per-row label and family tag. Cells stay strings
// until imputation/coercion turns them numeric.
struct SampleTable {
  FeatureSchema schema;
  std::vector<std::vector<Cell>> rows;
  std::vector<int> labels;
  std::vector<std::optional<std::string>> family;

  std::size_t num_rows() const { return rows.size(); }
  // Throws DataError if a row width, label or family vector is inconsistent.
  void check() const;
  SampleTable select_rows(std::span<const std::size_t> indices) const;
};

// Dense row-major matrix of finite values with binary labels.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  // Throws DataError on shape mismatch, non-finite values or labels outside {0,1}.
  FeatureMatrix(std::vector<std::string> feature_names, std::vector<double> values,
                std::vector<int> labels);

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return names_.size(); }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<int>& labels() const { return labels_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols(), cols()};
  }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  // Throws DataError listing every requested name that is absent.
  FeatureMatrix select_columns(std::span<const std::string> names) const;
  FeatureMatrix with_labels(int label) const;

  // Row concatenation; feature names must agree exactly.
  static FeatureMatrix concat(const FeatureMatrix& a, const FeatureMatrix& b);

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<int> labels_;
};

// Labels come from the label column when present, else default_label. The
// family tag is read from schema.family_tag_column() when present.
SampleTable load_table(const std::string& path,
                       const std::optional<FeatureSchema>& schema_hint = std::nullopt,
                       int default_label = 0);
SampleTable table_from_records(const std::vector<std::vector<std::string>>& records,
                               const std::optional<FeatureSchema>& schema_hint = std::nullopt,
                               int default_label = 0);

SampleTable select_family(const SampleTable& table, std::string_view family_name);

SampleTable sample_benign(const SampleTable& table, std::size_t n, std::uint64_t seed);

SampleTable drop_excluded_columns(const SampleTable& table);

SampleTable impute_none_counts(const SampleTable& table);

FeatureMatrix coerce_numeric(const SampleTable& table);

struct FilterResult {
  FeatureMatrix matrix;
  std::vector<std::string> dropped;
};

// Drops every column whose share of exact zeros is strictly above the threshold.
FilterResult filter_sparse_columns(const FeatureMatrix& matrix,
                                   double zero_fraction_threshold = 0.70);

// Feature groups used to summarize the retained column set.
enum class FeatureCategory {
  system_call,
  sys_misc_syscall,
  android_permission,
  permission_summary,
  app_structure,
  other
};

std::string_view to_string(FeatureCategory category);
FeatureCategory categorize_feature(std::string_view name);

struct CategoryCount {
  FeatureCategory category;
  std::size_t count;
};
std::vector<CategoryCount> category_counts(std::span<const std::string> names);

// Compares an observed count against the published one. Mismatch warns with
// a dataset-version note, or throws DataError when strict.
bool check_published_count(std::string_view stage, std::size_t observed, std::size_t expected,
                           bool strict);

// Parses a finite double; std::nullopt on any trailing text or non-finite value.
std::optional<double> parse_finite(std::string_view text);

std::string trim(std::string_view text);

}  // namespace droidsynth
