#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "droidsynth/dataset_prep.hpp"

namespace droidsynth {

struct SanitizationRule {
  std::string pattern;
  std::string replacement;
};

/// Ordered, case-sensitive substring substitutions that strip moderation
/// trigger words from feature names and prompts, plus their inverse.
///
/// Construction rejects maps that cannot round-trip: a replacement may not
/// contain any rule's pattern, and no replacement may contain another
/// replacement (the inverse would be ambiguous).
///
/// Binding a schema builds a skip-list of column names whose substitution
/// would not invert (for example a name that already contains "stop"). Those
/// names pass through both directions untouched, so desanitize(sanitize(n))
/// == n holds for every bound column.
class SanitizationMap {
 public:
  // An empty alias is looked up as the replacement of the rule whose pattern
  // starts with the family name.
  SanitizationMap(std::string family, std::vector<SanitizationRule> rules,
                  std::string alias = {});

  // Canonical rules for a family: BankBot -> FinTech, Locker/SLocker
  // Ransomware -> HiddenTech, anything else -> the supplied alias (default
  // AdTech for Airpush/StopSMS).
  static SanitizationMap for_family(std::string_view family, std::string_view alias = {});

  // One `pattern<TAB>replacement` per line, order-significant. Blank lines and
  // lines starting with '#' are ignored.
  static SanitizationMap from_rules_file(const std::string& path, std::string family);
  static SanitizationMap from_rules_text(std::string_view text, std::string family);

  const std::string& family() const { return family_; }
  const std::vector<SanitizationRule>& rules() const { return rules_; }

  // Records the names that must bypass substitution. Returns the skip-list.
  const std::set<std::string>& bind_schema(std::span<const std::string> names);
  const std::set<std::string>& skip_list() const { return skip_; }

  std::string sanitize(std::string_view text) const;
  std::string desanitize(std::string_view text) const;

  // Alias that replaces the family name in prompts and records.
  const std::string& alias() const { return alias_; }

 private:
  std::string apply(std::string_view text, bool forward) const;

  std::string family_;
  std::vector<SanitizationRule> rules_;
  std::string alias_;
  std::set<std::string> skip_;
};

// Replaces every occurrence of `from` in text, left to right, non-overlapping.
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);

// Sanitizes every column name; throws DataError naming the first pair of
// columns that collide afterwards. Binds the schema on the map first.
FeatureSchema sanitize_schema(const FeatureSchema& schema, SanitizationMap& map);

}  // namespace droidsynth
