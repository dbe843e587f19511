#include "droidsynth/dataset_prep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_set>

#include "droidsynth/csv.hpp"
#include "droidsynth/error.hpp"
#include "droidsynth/log.hpp"
#include "droidsynth/rng.hpp"

namespace droidsynth {
namespace {

template <std::size_t N>
bool in_list(const std::array<std::string_view, N>& list, std::string_view name) {
  return std::find(list.begin(), list.end(), name) != list.end();
}

std::string cell_text(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  return csv::format_number(std::get<double>(cell));
}

}  // namespace

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::optional<double> parse_finite(std::string_view text) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

// ---- FeatureSchema -------------------------------------------------------

FeatureSchema::FeatureSchema(std::vector<Column> columns, std::string family_tag_column)
    : columns_(std::move(columns)), family_tag_column_(std::move(family_tag_column)) {
  index_.reserve(columns_.size());
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (!index_.emplace(columns_[i].name, i).second) {
      throw DataError("schema: duplicate column name '" + columns_[i].name + "'");
    }
  }
}

FeatureSchema FeatureSchema::from_header(const std::vector<std::string>& names) {
  std::vector<Column> columns;
  columns.reserve(names.size());
  for (const auto& name : names) {
    ColumnRole role = ColumnRole::numeric_feature;
    if (in_list(kExcludedMetadataColumns, name)) {
      role = ColumnRole::excluded_metadata;
    } else if (in_list(kImputedCountColumns, name)) {
      role = ColumnRole::imputed_count;
    }
    columns.push_back({name, role});
  }
  return FeatureSchema(std::move(columns));
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

std::size_t FeatureSchema::count(ColumnRole role) const {
  return static_cast<std::size_t>(std::count_if(
      columns_.begin(), columns_.end(), [role](const Column& c) { return c.role == role; }));
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
  if (family_tag_column_ != other.family_tag_column_ || columns_.size() != other.columns_.size())
    return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name != other.columns_[i].name || columns_[i].role != other.columns_[i].role)
      return false;
  }
  return true;
}

// ---- SampleTable ---------------------------------------------------------

void SampleTable::check() const {
  if (labels.size() != rows.size() || family.size() != rows.size()) {
    throw DataError("table: label/family vectors do not match row count");
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size()) {
      throw DataError("table: row " + std::to_string(r) + " has " +
                      std::to_string(rows[r].size()) + " cells, schema has " +
                      std::to_string(schema.size()));
    }
    if (labels[r] != 0 && labels[r] != 1) {
      throw DataError("table: row " + std::to_string(r) + " has non-binary label");
    }
  }
}

SampleTable SampleTable::select_rows(std::span<const std::size_t> indices) const {
  SampleTable out{schema, {}, {}, {}};
  out.rows.reserve(indices.size());
  for (std::size_t i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
    out.family.push_back(family.at(i));
  }
  return out;
}

// ---- FeatureMatrix -------------------------------------------------------

FeatureMatrix::FeatureMatrix(std::vector<std::string> feature_names, std::vector<double> values,
                             std::vector<int> labels)
    : names_(std::move(feature_names)), values_(std::move(values)), labels_(std::move(labels)) {
  if (values_.size() != names_.size() * labels_.size()) {
    throw DataError("matrix: " + std::to_string(values_.size()) + " values for " +
                    std::to_string(labels_.size()) + " rows x " + std::to_string(names_.size()) +
                    " features");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("matrix: non-finite value at row " + std::to_string(i / names_.size()) +
                      ", column '" + names_[i % names_.size()] + "'");
    }
  }
  for (int label : labels_) {
    if (label != 0 && label != 1) throw DataError("matrix: labels must be 0 or 1");
  }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  std::vector<double> values;
  std::vector<int> labels;
  values.reserve(indices.size() * cols());
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= rows()) throw DataError("matrix: row index out of range");
    auto r = row(i);
    values.insert(values.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
  }
  return FeatureMatrix(names_, std::move(values), std::move(labels));
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names_.size(); ++i) index.emplace(names_[i], i);
  std::vector<std::size_t> picks;
  std::vector<std::string> missing;
  for (const auto& n : names) {
    auto it = index.find(n);
    if (it == index.end()) {
      missing.push_back(n);
    } else {
      picks.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "matrix: missing columns:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  std::vector<double> values;
  values.reserve(rows() * picks.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c : picks) values.push_back(at(r, c));
  }
  return FeatureMatrix({names.begin(), names.end()}, std::move(values), labels_);
}

FeatureMatrix FeatureMatrix::with_labels(int label) const {
  return FeatureMatrix(names_, values_, std::vector<int>(rows(), label));
}

FeatureMatrix FeatureMatrix::concat(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() == 0 && a.cols() == 0) return b;
  if (b.rows() == 0 && b.cols() == 0) return a;
  if (a.names_ != b.names_) throw DataError("matrix: cannot concatenate differing feature sets");
  std::vector<double> values = a.values_;
  values.insert(values.end(), b.values_.begin(), b.values_.end());
  std::vector<int> labels = a.labels_;
  labels.insert(labels.end(), b.labels_.begin(), b.labels_.end());
  return FeatureMatrix(a.names_, std::move(values), std::move(labels));
}

// ---- operations ----------------------------------------------------------

SampleTable table_from_records(const std::vector<std::vector<std::string>>& records,
                               const std::optional<FeatureSchema>& schema_hint,
                               int default_label) {
  if (records.empty() || records.front().empty() ||
      (records.front().size() == 1 && records.front().front().empty())) {
    throw DataError("load_table: missing header row");
  }
  const auto& header = records.front();
  FeatureSchema schema;
  if (schema_hint) {
    if (schema_hint->names() != header) {
      throw DataError("load_table: header does not match the supplied schema");
    }
    schema = *schema_hint;
  } else {
    schema = FeatureSchema::from_header(header);
  }

  const auto label_col = schema.index_of(kLabelColumn);
  const auto family_col = schema.index_of(schema.family_tag_column());

  SampleTable table{schema, {}, {}, {}};
  table.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t row_index = r - 1;
    if (rec.size() != header.size()) {
      throw DataError("load_table: row " + std::to_string(row_index) + " has " +
                      std::to_string(rec.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    int label = default_label;
    if (label_col) {
      auto v = parse_finite(trim(rec[*label_col]));
      if (!v || (*v != 0.0 && *v != 1.0)) {
        throw DataError("load_table: row " + std::to_string(row_index) +
                        " has non-binary label '" + rec[*label_col] + "'");
      }
      label = static_cast<int>(*v);
    }
    std::vector<Cell> cells(rec.begin(), rec.end());
    table.rows.push_back(std::move(cells));
    table.labels.push_back(label);
    table.family.push_back(family_col ? std::optional<std::string>(rec[*family_col])
                                      : std::nullopt);
  }
  return table;
}

SampleTable load_table(const std::string& path, const std::optional<FeatureSchema>& schema_hint,
                       int default_label) {
  return table_from_records(csv::read_file(path), schema_hint, default_label);
}

SampleTable select_family(const SampleTable& table, std::string_view family_name) {
  if (!table.schema.contains(table.schema.family_tag_column())) {
    throw DataError("select_family: family tag column '" + table.schema.family_tag_column() +
                    "' not present");
  }
  std::vector<std::size_t> picks;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    if (table.family[r] && *table.family[r] == family_name) picks.push_back(r);
  }
  if (picks.empty()) {
    throw DataError("select_family: no rows for family '" + std::string(family_name) + "'");
  }
  SampleTable out = table.select_rows(picks);
  std::fill(out.labels.begin(), out.labels.end(), 1);
  return out;
}

SampleTable sample_benign(const SampleTable& table, std::size_t n, std::uint64_t seed) {
  if (n > table.num_rows()) {
    throw DataError("sample_benign: requested " + std::to_string(n) + " rows, only " +
                    std::to_string(table.num_rows()) + " available");
  }
  const auto picks = sample_without_replacement(table.num_rows(), n, seed);
  SampleTable out = table.select_rows(picks);
  std::fill(out.labels.begin(), out.labels.end(), 0);
  return out;
}

SampleTable drop_excluded_columns(const SampleTable& table) {
  std::vector<std::string> missing;
  for (auto name : kExcludedMetadataColumns) {
    if (!table.schema.contains(name)) missing.emplace_back(name);
  }
  if (!missing.empty() && missing.size() < kExcludedMetadataColumns.size()) {
    std::string msg = "drop_excluded_columns: exclusion-list columns absent:";
    for (const auto& m : missing) msg += " " + m;
    log::warn(msg);
  } else if (missing.size() == kExcludedMetadataColumns.size()) {
    log::warn("drop_excluded_columns: none of the exclusion-list columns are present");
  }

  std::vector<std::size_t> keep;
  std::vector<Column> columns;
  for (std::size_t c = 0; c < table.schema.size(); ++c) {
    const auto& col = table.schema.columns()[c];
    if (col.role != ColumnRole::excluded_metadata) {
      keep.push_back(c);
      columns.push_back(col);
    }
  }
  if (keep.size() == table.schema.size()) return table;

  SampleTable out{FeatureSchema(std::move(columns), table.schema.family_tag_column()),
                  {},
                  table.labels,
                  table.family};
  out.rows.reserve(table.num_rows());
  for (const auto& row : table.rows) {
    std::vector<Cell> cells;
    cells.reserve(keep.size());
    for (std::size_t c : keep) cells.push_back(row[c]);
    out.rows.push_back(std::move(cells));
  }
  return out;
}

SampleTable impute_none_counts(const SampleTable& table) {
  SampleTable out = table;
  for (std::size_t c = 0; c < out.schema.size(); ++c) {
    const auto& col = out.schema.columns()[c];
    if (col.role != ColumnRole::imputed_count) continue;
    for (std::size_t r = 0; r < out.num_rows(); ++r) {
      Cell& cell = out.rows[r][c];
      const auto* text = std::get_if<std::string>(&cell);
      if (!text) continue;
      const std::string trimmed = trim(*text);
      if (trimmed == "None") {
        cell = 0.0;
      } else if (auto v = parse_finite(trimmed)) {
        cell = *v;
      } else {
        throw DataError("impute_none_counts: column '" + col.name + "', row " +
                        std::to_string(r) + ": unparseable count '" + *text + "'");
      }
    }
  }
  return out;
}

FeatureMatrix coerce_numeric(const SampleTable& table) {
  const std::size_t n_cols = table.schema.size();
  std::vector<double> values;
  values.reserve(table.num_rows() * n_cols);
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    if (table.rows[r].size() != n_cols) {
      throw DataError("coerce_numeric: row " + std::to_string(r) + " has wrong width");
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      const Cell& cell = table.rows[r][c];
      if (const auto* d = std::get_if<double>(&cell)) {
        if (!std::isfinite(*d)) {
          throw DataError("coerce_numeric: column '" + table.schema.columns()[c].name +
                          "', row " + std::to_string(r) + ": non-finite value");
        }
        values.push_back(*d);
        continue;
      }
      auto v = parse_finite(trim(std::get<std::string>(cell)));
      if (!v) {
        throw DataError("coerce_numeric: column '" + table.schema.columns()[c].name + "', row " +
                        std::to_string(r) + ": cannot parse '" + cell_text(cell) + "'");
      }
      values.push_back(*v);
    }
  }
  return FeatureMatrix(table.schema.names(), std::move(values), table.labels);
}

FilterResult filter_sparse_columns(const FeatureMatrix& matrix, double zero_fraction_threshold) {
  const std::size_t n = matrix.rows();
  std::vector<std::string> keep;
  std::vector<std::string> dropped;
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    std::size_t zeros = 0;
    for (std::size_t r = 0; r < n; ++r) zeros += matrix.at(r, c) == 0.0;
    // Integer comparison zeros/n > t  <=>  zeros > t*n, evaluated without
    // rounding the ratio (7 of 10 at 0.70 must be kept).
    const bool sparse = n > 0 && static_cast<long double>(zeros) >
                                     static_cast<long double>(zero_fraction_threshold) * n +
                                         1e-9L;
    (sparse ? dropped : keep).push_back(matrix.feature_names()[c]);
  }
  return {matrix.select_columns(keep), std::move(dropped)};
}

// ---- categories ----------------------------------------------------------

std::string_view to_string(FeatureCategory category) {
  switch (category) {
    case FeatureCategory::system_call: return "System Call Features";
    case FeatureCategory::sys_misc_syscall: return "SYS_XXX & Misc Syscalls";
    case FeatureCategory::android_permission: return "Android Permissions";
    case FeatureCategory::permission_summary: return "Permission Summary Metrics";
    case FeatureCategory::app_structure: return "App Structure & Manifest Features";
    case FeatureCategory::other: return "Other / Unclassified";
  }
  return "Other / Unclassified";
}

FeatureCategory categorize_feature(std::string_view name) {
  static const std::set<std::string_view> kPermissionSummary = {
      "NrPermissions", "Normal",    "Dangerous", "Signature", "Custom",
      "Unknown",       "Privileged", "Deprecated", "TotalPermissions"};
  static const std::set<std::string_view> kAppStructure = {
      "Activities",      "NrIntServices",         "NrIntServicesActions",
      "NrIntActivities", "NrIntActivitiesActions", "NrIntReceivers",
      "NrIntReceiversActions", "TotalIntentFilters", "NrServices",
      "NrReceivers",     "NrProviders",           "FileSize"};

  if (name.starts_with("SYS_")) return FeatureCategory::sys_misc_syscall;
  if (kPermissionSummary.count(name)) return FeatureCategory::permission_summary;
  if (kAppStructure.count(name)) return FeatureCategory::app_structure;

  bool has_upper = false, has_lower = false, has_alpha = false;
  for (char ch : name) {
    if (ch >= 'A' && ch <= 'Z') has_upper = has_alpha = true;
    if (ch >= 'a' && ch <= 'z') has_lower = has_alpha = true;
  }
  // Permission constants are upper-case identifiers (ACCESS_WIFI_STATE) or
  // fully qualified (android.permission.X, com.vendor.permission.Y).
  if (name.find(".permission.") != std::string_view::npos ||
      (has_upper && !has_lower)) {
    return FeatureCategory::android_permission;
  }
  // Syscall names are lower-case identifiers (read, rt_sigaction, _llseek).
  if (has_alpha && has_lower && !has_upper) return FeatureCategory::system_call;
  return FeatureCategory::other;
}

std::vector<CategoryCount> category_counts(std::span<const std::string> names) {
  std::vector<CategoryCount> counts = {
      {FeatureCategory::system_call, 0},        {FeatureCategory::sys_misc_syscall, 0},
      {FeatureCategory::android_permission, 0}, {FeatureCategory::permission_summary, 0},
      {FeatureCategory::app_structure, 0},      {FeatureCategory::other, 0}};
  for (const auto& n : names) ++counts[static_cast<std::size_t>(categorize_feature(n))].count;
  return counts;
}

bool check_published_count(std::string_view stage, std::size_t observed, std::size_t expected,
                           bool strict) {
  if (observed == expected) return true;
  std::string msg = std::string(stage) + ": published dataset version has " +
                    std::to_string(expected) + ", found " + std::to_string(observed) +
                    " (dataset-version drift)";
  if (strict) throw DataError(msg);
  log::warn(msg);
  return false;
}

}  // namespace droidsynth
