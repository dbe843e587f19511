#include "droidsynth/sanitizer.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "droidsynth/error.hpp"
#include "droidsynth/log.hpp"

namespace droidsynth {

std::string replace_all(std::string_view text, std::string_view from, std::string_view to) {
  if (from.empty()) return std::string(text);
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (true) {
    const auto hit = text.find(from, pos);
    if (hit == std::string_view::npos) break;
    out.append(text.substr(pos, hit - pos));
    out.append(to);
    pos = hit + from.size();
  }
  out.append(text.substr(pos));
  return out;
}

SanitizationMap::SanitizationMap(std::string family, std::vector<SanitizationRule> rules,
                                 std::string alias)
    : family_(std::move(family)), rules_(std::move(rules)), alias_(std::move(alias)) {
  for (const auto& r : rules_) {
    if (r.pattern.empty() || r.replacement.empty()) {
      throw UsageError("sanitization map: empty pattern or replacement");
    }
  }
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    for (std::size_t j = 0; j < rules_.size(); ++j) {
      const auto& a = rules_[i];
      const auto& b = rules_[j];
      if (a.replacement.find(b.pattern) != std::string::npos) {
        throw UsageError("sanitization map: replacement '" + a.replacement +
                         "' contains pattern '" + b.pattern + "'");
      }
      if (i != j && a.replacement.find(b.replacement) != std::string::npos) {
        throw UsageError("sanitization map: ambiguous inverse, replacement '" + a.replacement +
                         "' contains replacement '" + b.replacement + "'");
      }
    }
  }
  if (alias_.empty() && !family_.empty()) {
    for (const auto& r : rules_) {
      if (r.pattern.starts_with(family_) || family_.starts_with(r.pattern)) {
        alias_ = r.replacement;
        break;
      }
    }
  }
}

SanitizationMap SanitizationMap::for_family(std::string_view family, std::string_view alias) {
  std::string pattern(family);
  std::string default_alias = "AdTech";
  if (family.starts_with("BankBot")) {
    default_alias = "FinTech";
  } else if (family.starts_with("Locker")) {
    pattern = "Locker/SLocker Ransomware";
    default_alias = "HiddenTech";
  }
  std::string chosen = alias.empty() ? default_alias : std::string(alias);
  std::vector<SanitizationRule> rules = {{"Malware", "AppType"}, {"malware", "app"},
                                         {pattern, chosen},      {"MalFamily", "AppFamily"},
                                         {"kill", "stop"},       {"ptrace", "trace"}};
  return SanitizationMap(std::string(family), std::move(rules), chosen);
}

SanitizationMap SanitizationMap::from_rules_text(std::string_view text, std::string family) {
  std::vector<SanitizationRule> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw UsageError("rules file line " + std::to_string(line_no) +
                       ": expected pattern<TAB>replacement");
    }
    rules.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return SanitizationMap(std::move(family), std::move(rules));
}

SanitizationMap SanitizationMap::from_rules_file(const std::string& path, std::string family) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open rules file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_rules_text(buffer.str(), std::move(family));
}

std::string SanitizationMap::apply(std::string_view text, bool forward) const {
  std::string out(text);
  if (forward) {
    for (const auto& r : rules_) out = replace_all(out, r.pattern, r.replacement);
  } else {
    for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) {
      out = replace_all(out, it->replacement, it->pattern);
    }
  }
  return out;
}

const std::set<std::string>& SanitizationMap::bind_schema(std::span<const std::string> names) {
  skip_.clear();
  for (const auto& n : names) {
    if (apply(apply(n, true), false) != n) {
      skip_.insert(n);
      if (apply(n, true) != n) {
        log::warn("sanitizer: column '" + n +
                  "' cannot round-trip and is left unsanitized");
      }
    }
  }
  return skip_;
}

std::string SanitizationMap::sanitize(std::string_view text) const {
  if (skip_.count(std::string(text))) return std::string(text);
  return apply(text, true);
}

std::string SanitizationMap::desanitize(std::string_view text) const {
  if (skip_.count(std::string(text))) return std::string(text);
  return apply(text, false);
}

FeatureSchema sanitize_schema(const FeatureSchema& schema, SanitizationMap& map) {
  const auto names = schema.names();
  map.bind_schema(names);
  std::map<std::string, std::string> seen;  // sanitized -> original
  std::vector<Column> columns;
  columns.reserve(names.size());
  for (const auto& col : schema.columns()) {
    std::string s = map.sanitize(col.name);
    auto [it, inserted] = seen.emplace(s, col.name);
    if (!inserted) {
      throw DataError("sanitize_schema: columns '" + it->second + "' and '" + col.name +
                      "' both become '" + s + "'");
    }
    columns.push_back({std::move(s), col.role});
  }
  return FeatureSchema(std::move(columns), map.sanitize(schema.family_tag_column()));
}

}  // namespace droidsynth
