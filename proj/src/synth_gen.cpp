#include "droidsynth/synth_gen.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "droidsynth/csv.hpp"
#include "droidsynth/error.hpp"
#include "droidsynth/rng.hpp"

namespace droidsynth {
namespace {

bool ends_with_date(std::string_view name) { return name.ends_with("Date"); }

ordered_json number_cell(double v) {
  if (std::floor(v) == v && std::fabs(v) < 9007199254740992.0) {
    return ordered_json(static_cast<std::int64_t>(v));
  }
  return ordered_json(v);
}

std::string value_text(const ordered_json& v) {
  if (v.is_null()) return "null";
  return v.dump(-1, ' ', true);
}

const std::regex& hash_re() {
  static const std::regex re("^[0-9a-f]{64}$");
  return re;
}
const std::regex& package_re() {
  static const std::regex re("^[a-z][a-z0-9_]*(\\.[a-z][a-z0-9_]*)+$");
  return re;
}
const std::regex& date_re() {
  static const std::regex re("^(0[1-9]|1[0-2])/(0[1-9]|[12][0-9]|3[01])/[0-9]{4}$");
  return re;
}

}  // namespace

// ---- layout --------------------------------------------------------------

RecordLayout RecordLayout::from_schema(const FeatureSchema& schema, SanitizationMap& map) {
  const auto original = schema.names();
  FeatureSchema sanitized = sanitize_schema(schema, map);
  RecordLayout layout;
  layout.original_keys = original;
  layout.keys = sanitized.names();
  layout.label_key = map.sanitize(kLabelColumn);
  for (std::size_t i = 0; i < original.size(); ++i) {
    const std::string& name = original[i];
    const std::string& key = layout.keys[i];
    if (name == schema.family_tag_column()) {
      layout.family_key = key;
    } else if (name == "Detection_Ratio") {
      layout.ratio_key = key;
    } else if (name == "sha256") {
      layout.hash_key = key;
    } else if (name == "Package") {
      layout.package_key = key;
    } else if (ends_with_date(name)) {
      layout.date_keys.push_back(key);
    } else if (name == "Scanners") {
      layout.string_keys.push_back(key);
    }
  }
  return layout;
}

bool RecordLayout::is_integer_key(std::string_view key) const {
  if (key == label_key) return false;
  if ((family_key && key == *family_key) || (ratio_key && key == *ratio_key) ||
      (hash_key && key == *hash_key) || (package_key && key == *package_key)) {
    return false;
  }
  if (std::find(date_keys.begin(), date_keys.end(), key) != date_keys.end()) return false;
  if (std::find(string_keys.begin(), string_keys.end(), key) != string_keys.end()) return false;
  return true;
}

std::optional<std::size_t> RecordLayout::index_of(std::string_view key) const {
  auto it = std::find(keys.begin(), keys.end(), key);
  if (it == keys.end()) return std::nullopt;
  return static_cast<std::size_t>(it - keys.begin());
}

// ---- serialization -------------------------------------------------------

std::string python_json_dumps(const ordered_json& value) {
  if (value.is_object()) {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, v] : value.items()) {
      if (!first) out += ", ";
      first = false;
      out += ordered_json(k).dump(-1, ' ', true);
      out += ": ";
      out += python_json_dumps(v);
    }
    return out + "}";
  }
  if (value.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (i) out += ", ";
      out += python_json_dumps(value[i]);
    }
    return out + "]";
  }
  return value.dump(-1, ' ', true);
}

std::string compact_json_dumps(const ordered_json& value) { return value.dump(-1, ' ', true); }

// ---- corpus --------------------------------------------------------------

SampleTable subsample_representatives(const SampleTable& family_rows, std::size_t n,
                                      std::uint64_t seed) {
  if (n > family_rows.num_rows()) {
    throw DataError("subsample_representatives: requested " + std::to_string(n) +
                    " rows, only " + std::to_string(family_rows.num_rows()) + " available");
  }
  const auto picks = sample_without_replacement(family_rows.num_rows(), n, seed);
  return family_rows.select_rows(picks);
}

ordered_json row_to_record(const SampleTable& table, std::size_t row, const RecordLayout& layout,
                           const SanitizationMap& map, std::string_view alias) {
  ordered_json record = ordered_json::object();
  const auto& cells = table.rows.at(row);
  for (std::size_t c = 0; c < layout.keys.size(); ++c) {
    const std::string& key = layout.keys[c];
    if (key == layout.label_key) {
      record[key] = 1;
      continue;
    }
    if (layout.family_key && key == *layout.family_key) {
      record[key] = std::string(alias);
      continue;
    }
    const Cell& cell = cells.at(c);
    if (const auto* d = std::get_if<double>(&cell)) {
      record[key] = number_cell(*d);
      continue;
    }
    const std::string text = trim(std::get<std::string>(cell));
    if (text.empty()) {
      throw DataError("build_finetune_corpus: row " + std::to_string(row) + " is missing '" +
                      layout.original_keys[c] + "'");
    }
    if (layout.is_integer_key(key) || (layout.ratio_key && key == *layout.ratio_key)) {
      if (auto v = parse_finite(text)) {
        record[key] = number_cell(*v);
        continue;
      }
      if (text == "None") {
        record[key] = 0;
        continue;
      }
    }
    record[key] = map.sanitize(text);
  }
  return record;
}

std::string finetune_system_message(std::size_t key_count) {
  return "You are a data-generation engine for Android application analysis records.\n"
         "Output JSON with exactly " +
         std::to_string(key_count) + " keys. Keep AppType=1. Output only valid JSON.";
}

std::string finetune_user_message(std::string_view alias) {
  return "Generate 1 Android " + std::string(alias) + " app analysis record.";
}

std::vector<FineTuneExample> build_finetune_corpus(const SampleTable& rows, SanitizationMap& map,
                                                   std::string_view alias) {
  std::vector<FineTuneExample> corpus;
  if (rows.num_rows() == 0) return corpus;
  const RecordLayout layout = RecordLayout::from_schema(rows.schema, map);
  const std::string system = finetune_system_message(layout.keys.size());
  const std::string user = finetune_user_message(alias);
  corpus.reserve(rows.num_rows());
  for (std::size_t r = 0; r < rows.num_rows(); ++r) {
    ordered_json array = ordered_json::array();
    array.push_back(row_to_record(rows, r, layout, map, alias));
    corpus.push_back({system, user, python_json_dumps(array)});
  }
  return corpus;
}

std::string serialize_corpus_line(const FineTuneExample& example) {
  ordered_json line = {{"messages",
                        {{{"role", "system"}, {"content", example.system_content}},
                         {{"role", "user"}, {"content", example.user_content}},
                         {{"role", "assistant"}, {"content", example.assistant_content}}}}};
  return compact_json_dumps(line);
}

std::string serialize_corpus(const std::vector<FineTuneExample>& corpus) {
  std::string out;
  for (const auto& ex : corpus) {
    out += serialize_corpus_line(ex);
    out += '\n';
  }
  return out;
}

std::vector<FineTuneExample> parse_corpus(std::string_view text) {
  std::vector<FineTuneExample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string& why) {
      return DataError("corpus line " + std::to_string(line_no) + ": " + why);
    };
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) throw fail("not valid JSON");
    if (!j.is_object() || !j.contains("messages") || !j["messages"].is_array() ||
        j["messages"].size() != 3) {
      throw fail("expected {\"messages\": [system, user, assistant]}");
    }
    const char* roles[] = {"system", "user", "assistant"};
    std::string contents[3];
    for (int i = 0; i < 3; ++i) {
      const auto& m = j["messages"][i];
      if (!m.is_object() || m.value("role", "") != roles[i] || !m.contains("content") ||
          !m["content"].is_string()) {
        throw fail(std::string("message ") + std::to_string(i) + " must be a '" + roles[i] +
                   "' message with string content");
      }
      contents[i] = m["content"].get<std::string>();
    }
    ordered_json assistant = ordered_json::parse(contents[2], nullptr, false);
    if (assistant.is_discarded() || !assistant.is_array() || assistant.size() != 1 ||
        !assistant[0].is_object()) {
      throw fail("assistant content must be a one-record array");
    }
    out.push_back({contents[0], contents[1], contents[2]});
  }
  return out;
}

// ---- prompts -------------------------------------------------------------

std::vector<std::string> generation_rule_lines(std::string_view alias) {
  const std::string a(alias);
  return {
      "You are a synthetic data generator for Android " + a +
          " application security analysis.",
      "OUTPUT REQUIREMENTS:",
      "- Return valid JSON object only (no markdown, no explanations)",
      "- Use compact JSON format (no extra whitespace)",
      "- Include ALL keys from the reference schema below",
      "- All numeric values must be integers (no decimals)",
      "- String values must be properly quoted",
      "- AppType must always be 1",
      "SCHEMA REFERENCE (for structure only - DO NOT copy these values):",
      "GENERATION RULES:",
      "- Generate completely unique synthetic values",
      "- System call counts should reflect realistic Android " + a + " app behavior",
      "- Permission counts should be consistent (nr_permissions = sum of permission grants)",
      "- Detection_Ratio should be between 0.0 and 1.0",
      "- Package name should follow Android naming convention (com.company.app)",
      "- SHA256 should be 64-character hex string",
      "- File sizes should be realistic for mobile apps (100KB - 50MB range)",
      "- Dates should use MM/DD/YYYY format",
      "- AppFamily must be \"" + a + "\"",
      "- No null values - use 0 for unused numeric fields",
  };
}

GenerationPrompts build_generation_prompts(const RecordLayout& layout,
                                           const ordered_json& exemplar, std::string_view alias,
                                           std::size_t record_num) {
  if (!exemplar.is_object()) throw DataError("build_generation_prompts: exemplar is not an object");
  std::set<std::string> expected(layout.keys.begin(), layout.keys.end());
  std::set<std::string> actual;
  for (const auto& [k, v] : exemplar.items()) actual.insert(k);
  if (expected != actual) {
    std::string msg = "build_generation_prompts: exemplar keys differ from schema;";
    for (const auto& k : expected)
      if (!actual.count(k)) msg += " missing " + k;
    for (const auto& k : actual)
      if (!expected.count(k)) msg += " extra " + k;
    throw DataError(msg);
  }

  const auto lines = generation_rule_lines(alias);
  std::string system;
  system += lines[0] + "\n\n";
  system += lines[1] + "\n";
  for (std::size_t i = 2; i <= 7; ++i) system += lines[i] + "\n";
  system += "\n" + lines[8] + "\n";
  system += compact_json_dumps(exemplar) + "\n\n";
  system += lines[9] + "\n";
  for (std::size_t i = 10; i < lines.size(); ++i) system += lines[i] + "\n";

  std::string user = "Generate 1 unique Android " + std::string(alias) +
                     " security analysis record #" + std::to_string(record_num) +
                     ". Create realistic synthetic data that differs from the reference schema.";
  return {std::move(system), std::move(user)};
}

// ---- candidates ----------------------------------------------------------

CandidateRecord CandidateRecord::from_text(std::string raw_text) {
  CandidateRecord c;
  c.raw_text = std::move(raw_text);
  ordered_json parsed = ordered_json::parse(c.raw_text, nullptr, false);
  if (parsed.is_discarded()) return c;
  if (parsed.is_object()) {
    c.values = std::move(parsed);
  } else if (parsed.is_array() && parsed.size() == 1 && parsed[0].is_object()) {
    c.values = std::move(parsed[0]);
  }
  return c;
}

CandidateRecord CandidateRecord::from_values(ordered_json values) {
  CandidateRecord c;
  c.raw_text = compact_json_dumps(values);
  c.values = std::move(values);
  return c;
}

std::map<std::string, ColumnStats> compute_column_stats(const SampleTable& table) {
  std::map<std::string, ColumnStats> out;
  for (std::size_t c = 0; c < table.schema.size(); ++c) {
    const auto& col = table.schema.columns()[c];
    if (col.name == kLabelColumn) continue;
    std::vector<double> values;
    values.reserve(table.num_rows());
    bool numeric = true;
    for (std::size_t r = 0; r < table.num_rows() && numeric; ++r) {
      const Cell& cell = table.rows[r][c];
      if (const auto* d = std::get_if<double>(&cell)) {
        values.push_back(*d);
        continue;
      }
      const std::string text = trim(std::get<std::string>(cell));
      if (auto v = parse_finite(text)) {
        values.push_back(*v);
      } else if (text == "None" && col.role == ColumnRole::imputed_count) {
        values.push_back(0.0);
      } else {
        numeric = false;
      }
    }
    if (!numeric || values.empty()) continue;
    ColumnStats s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.zero_rate = static_cast<double>(std::count(values.begin(), values.end(), 0.0)) /
                  static_cast<double>(values.size());
    out.emplace(col.name, s);
  }
  return out;
}

CandidateRecord mock_generate_record(const RecordLayout& layout,
                                     const std::map<std::string, ColumnStats>& stats,
                                     std::uint64_t seed, std::string_view alias) {
  static constexpr const char* kWords[] = {"alpha", "nova",  "pixel", "vault", "orbit",
                                           "lumen", "cargo", "delta", "frost", "quill"};
  static constexpr char kHex[] = "0123456789abcdef";
  Rng rng(seed);
  ordered_json record = ordered_json::object();
  for (std::size_t i = 0; i < layout.keys.size(); ++i) {
    const std::string& key = layout.keys[i];
    const std::string& original = layout.original_keys[i];
    if (key == layout.label_key) {
      record[key] = 1;
    } else if (layout.family_key && key == *layout.family_key) {
      record[key] = std::string(alias);
    } else if (layout.ratio_key && key == *layout.ratio_key) {
      record[key] = static_cast<double>(rng.between(0, 10000)) / 10000.0;
    } else if (layout.hash_key && key == *layout.hash_key) {
      std::string h(64, '0');
      for (char& ch : h) ch = kHex[rng.below(16)];
      record[key] = h;
    } else if (layout.package_key && key == *layout.package_key) {
      record[key] = std::string("com.") + kWords[rng.below(10)] + "." + kWords[rng.below(10)] +
                    std::to_string(rng.below(1000));
    } else if (std::find(layout.date_keys.begin(), layout.date_keys.end(), key) !=
               layout.date_keys.end()) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%02d/%02d/%04d", static_cast<int>(rng.between(1, 12)),
                    static_cast<int>(rng.between(1, 28)), static_cast<int>(rng.between(2010, 2020)));
      record[key] = std::string(buf);
    } else if (std::find(layout.string_keys.begin(), layout.string_keys.end(), key) !=
               layout.string_keys.end()) {
      record[key] = std::string("Scanner") + std::to_string(rng.below(60));
    } else {
      auto it = stats.find(original);
      std::int64_t value = 0;
      if (it != stats.end()) {
        const ColumnStats& s = it->second;
        const bool zero = rng.unit() < s.zero_rate;
        const auto lo = static_cast<std::int64_t>(std::llround(s.min));
        const auto hi = static_cast<std::int64_t>(std::llround(s.max));
        const std::int64_t drawn = rng.between(lo, hi);
        value = zero ? 0 : drawn;
      }
      record[key] = value;
    }
  }
  return CandidateRecord::from_values(std::move(record));
}

// ---- validation ----------------------------------------------------------

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::accepted: return "accepted";
    case Verdict::repaired: return "repaired";
    case Verdict::rejected: return "rejected";
  }
  return "rejected";
}

ordered_json ValidationReport::to_json() const {
  ordered_json j;
  j["verdict"] = std::string(to_string(verdict));
  j["violations"] = ordered_json::array();
  for (const auto& v : violations) j["violations"].push_back({{"rule", v.rule}, {"detail", v.detail}});
  j["repairs"] = ordered_json::array();
  for (const auto& r : repairs)
    j["repairs"].push_back({{"key", r.key}, {"old", r.old_value}, {"new", r.new_value}});
  return j;
}

ValidationReport validate_record(const CandidateRecord& candidate, const RecordLayout& layout) {
  ValidationReport report;
  auto violate = [&](int rule, std::string detail) {
    report.violations.push_back({rule, std::move(detail)});
  };

  // 1
  if (!candidate.values.is_object()) {
    violate(1, "emission is not a single JSON object or one-element array");
    report.verdict = Verdict::rejected;
    return report;
  }
  const ordered_json& values = candidate.values;

  // 2: the label key is governed by rule 9
  {
    std::set<std::string> expected(layout.keys.begin(), layout.keys.end());
    std::string missing, extra;
    for (const auto& k : layout.keys) {
      if (k != layout.label_key && !values.contains(k)) missing += " " + k;
    }
    for (const auto& [k, v] : values.items()) {
      if (!expected.count(k)) extra += " " + k;
    }
    if (!missing.empty()) violate(2, "missing keys:" + missing);
    if (!extra.empty()) violate(2, "extra keys:" + extra);
  }

  // 3
  for (const auto& [k, v] : values.items()) {
    if (k == layout.label_key || !layout.index_of(k) || !layout.is_integer_key(k) || v.is_null())
      continue;
    if (!v.is_number_integer()) violate(3, k + " is not an integer: " + value_text(v));
  }

  // 4
  if (layout.ratio_key && values.contains(*layout.ratio_key)) {
    const auto& v = values[*layout.ratio_key];
    if (!v.is_null()) {
      if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0) {
        violate(4, *layout.ratio_key + " outside [0, 1]: " + value_text(v));
      }
    }
  }

  auto check_string = [&](const std::optional<std::string>& key, const std::regex& re, int rule,
                          const char* what) {
    if (!key || !values.contains(*key)) return;
    const auto& v = values[*key];
    if (v.is_null()) return;
    if (!v.is_string() || !std::regex_match(v.get<std::string>(), re)) {
      violate(rule, *key + " is not " + what + ": " + value_text(v));
    }
  };
  check_string(layout.hash_key, hash_re(), 5, "a 64-char lowercase hex string");    // 5
  check_string(layout.package_key, package_re(), 6, "a dotted lowercase package");  // 6
  for (const auto& d : layout.date_keys) check_string(d, date_re(), 7, "an MM/DD/YYYY date");

  // 8
  for (const auto& [k, v] : values.items()) {
    if (k != layout.label_key && v.is_null()) violate(8, k + " is null");
  }

  // 9
  ordered_json label_value = values.contains(layout.label_key) ? values[layout.label_key]
                                                               : ordered_json();
  const bool label_ok = label_value.is_number_integer() && label_value.get<std::int64_t>() == 1;
  if (!label_ok) {
    const std::string old = values.contains(layout.label_key) ? value_text(label_value)
                                                              : std::string("<absent>");
    violate(9, layout.label_key + " was " + old);
    report.repairs.push_back({layout.label_key, old, "1"});
  }

  const bool fatal = std::any_of(report.violations.begin(), report.violations.end(),
                                 [](const Violation& v) { return v.rule != 9; });
  if (fatal) {
    report.verdict = Verdict::rejected;
    return report;
  }
  report.verdict = report.repairs.empty() ? Verdict::accepted : Verdict::repaired;
  report.record = ordered_json::object();
  for (const auto& k : layout.keys) {
    report.record[k] = k == layout.label_key ? ordered_json(1) : values[k];
  }
  return report;
}

DedupResult dedup_records(const std::vector<CandidateRecord>& records,
                          std::optional<std::string> hash_key) {
  DedupResult result;
  std::set<std::string> seen;
  for (const auto& rec : records) {
    // nlohmann::json (std::map-backed) gives a key-order independent dump.
    nlohmann::json masked = rec.values.is_null() ? nlohmann::json() : nlohmann::json(rec.values);
    if (hash_key && masked.is_object()) masked.erase(*hash_key);
    if (seen.insert(masked.dump()).second) {
      result.kept.push_back(rec);
    } else {
      ++result.removed_count;
    }
  }
  return result;
}

FeatureMatrix records_to_matrix(const std::vector<ordered_json>& records,
                                const SanitizationMap& map,
                                const std::vector<std::string>& columns) {
  std::vector<double> values;
  values.reserve(records.size() * columns.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    std::map<std::string, const ordered_json*> by_original;
    for (const auto& [k, v] : records[r].items()) by_original.emplace(map.desanitize(k), &v);
    std::string missing;
    for (const auto& col : columns) {
      auto it = by_original.find(col);
      if (it == by_original.end()) {
        missing += " " + col;
        continue;
      }
      const ordered_json& v = *it->second;
      if (!v.is_number()) {
        throw DataError("synthetic record " + std::to_string(r) + ": column '" + col +
                        "' is not numeric");
      }
      values.push_back(v.get<double>());
    }
    if (!missing.empty()) {
      throw DataError("synthetic record " + std::to_string(r) + " is missing columns:" + missing);
    }
  }
  return FeatureMatrix(columns, std::move(values), std::vector<int>(records.size(), 1));
}

}  // namespace droidsynth
