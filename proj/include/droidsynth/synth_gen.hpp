#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "droidsynth/dataset_prep.hpp"
#include "droidsynth/sanitizer.hpp"

namespace droidsynth {

using ordered_json = nlohmann::ordered_json;

/// Field roles of a generated record, expressed in sanitized key names.
///
/// The label, ratio, hash, package and date keys are optional so that small
/// fixtures without metadata columns still validate. Every key that is not a
/// string-typed metadata field must hold an integer.
struct RecordLayout {
  std::vector<std::string> keys;           // sanitized, schema order
  std::vector<std::string> original_keys;  // same order, pre-sanitization
  std::string label_key = "AppType";
  std::optional<std::string> family_key;
  std::optional<std::string> ratio_key;
  std::optional<std::string> hash_key;
  std::optional<std::string> package_key;
  std::vector<std::string> date_keys;
  std::vector<std::string> string_keys;  // free-form strings (Scanners, ...)

  // Derived from the unsanitized schema; binds the schema on the map.
  static RecordLayout from_schema(const FeatureSchema& schema, SanitizationMap& map);

  bool is_integer_key(std::string_view key) const;
  std::optional<std::size_t> index_of(std::string_view key) const;
};

struct FineTuneExample {
  std::string system_content;
  std::string user_content;
  std::string assistant_content;
};

// Serializes like Python's json.dumps defaults: ", " and ": " separators,
// non-ASCII escaped.
std::string python_json_dumps(const ordered_json& value);
// Compact form with ',' and ':' separators, non-ASCII escaped.
std::string compact_json_dumps(const ordered_json& value);

SampleTable subsample_representatives(const SampleTable& family_rows, std::size_t n,
                                      std::uint64_t seed);

// One sanitized record per table row, keys in schema order, label forced to 1
// and the family tag replaced by the alias. Numeric text becomes numbers.
ordered_json row_to_record(const SampleTable& table, std::size_t row, const RecordLayout& layout,
                           const SanitizationMap& map, std::string_view alias);

std::vector<FineTuneExample> build_finetune_corpus(const SampleTable& rows,
                                                   SanitizationMap& map, std::string_view alias);

// One JSON object per line: {"messages":[system,user,assistant]}.
std::string serialize_corpus_line(const FineTuneExample& example);
std::string serialize_corpus(const std::vector<FineTuneExample>& corpus);
// Throws DataError naming the first line that is not a well-formed example.
std::vector<FineTuneExample> parse_corpus(std::string_view text);

std::string finetune_system_message(std::size_t key_count);
std::string finetune_user_message(std::string_view alias);

struct GenerationPrompts {
  std::string system;
  std::string user;
};

// Throws DataError when the exemplar's key set differs from layout.keys.
GenerationPrompts build_generation_prompts(const RecordLayout& layout,
                                           const ordered_json& exemplar, std::string_view alias,
                                           std::size_t record_num);

// The fixed rule lines of the system prompt, alias substituted.
std::vector<std::string> generation_rule_lines(std::string_view alias);

struct CandidateRecord {
  // The single object extracted from the emission, or null when the text is
  // not one object / one-element array of an object.
  ordered_json values;
  std::string raw_text;

  static CandidateRecord from_text(std::string raw_text);
  static CandidateRecord from_values(ordered_json values);
};

struct ColumnStats {
  double min = 0.0;
  double max = 0.0;
  double zero_rate = 1.0;
};

// Keyed by original column name; covers every column whose cells all parse as
// numbers after "None" imputation.
std::map<std::string, ColumnStats> compute_column_stats(const SampleTable& table);

CandidateRecord mock_generate_record(const RecordLayout& layout,
                                     const std::map<std::string, ColumnStats>& stats,
                                     std::uint64_t seed, std::string_view alias);

enum class Verdict { accepted, repaired, rejected };
std::string_view to_string(Verdict verdict);

struct Violation {
  int rule = 0;
  std::string detail;
};

struct Repair {
  std::string key;
  std::string old_value;
  std::string new_value;
};

struct ValidationReport {
  Verdict verdict = Verdict::accepted;
  std::vector<Violation> violations;
  std::vector<Repair> repairs;
  // Repaired record in layout key order; null when rejected.
  ordered_json record;

  ordered_json to_json() const;
};

/// Rule ids, checked in this order:
///  1 single object (or one-element array)   6 package name convention
///  2 key set equals the schema              7 MM/DD/YYYY dates
///  3 integer numeric fields                 8 no null cells
///  4 ratio within [0, 1]                    9 label equals 1 (repaired)
///  5 64-char lowercase hex hash
/// Only rule 9 is repairable; any other violation rejects.
ValidationReport validate_record(const CandidateRecord& candidate, const RecordLayout& layout);

struct DedupResult {
  std::vector<CandidateRecord> kept;
  std::size_t removed_count = 0;
};

// Equality ignores the hash field and key order; first occurrence wins.
DedupResult dedup_records(const std::vector<CandidateRecord>& records,
                          std::optional<std::string> hash_key = std::string("sha256"));

// Desanitizes keys and projects records onto `columns` (original names).
// Throws DataError naming missing columns or non-numeric cells.
FeatureMatrix records_to_matrix(const std::vector<ordered_json>& records,
                                const SanitizationMap& map,
                                const std::vector<std::string>& columns);

}  // namespace droidsynth
