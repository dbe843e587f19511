#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "droidsynth/dataset_prep.hpp"

namespace droidsynth {

enum class ScenarioKind { real_only, real_plus_synth, synth_to_real };
enum class Provenance { real_malware, synthetic_malware, benign };

std::string_view to_string(ScenarioKind kind);
std::string_view to_string(Provenance provenance);
ScenarioKind scenario_from_string(std::string_view text);
Provenance provenance_from_string(std::string_view text);
inline constexpr ScenarioKind kAllScenarios[] = {ScenarioKind::real_only,
                                                 ScenarioKind::real_plus_synth,
                                                 ScenarioKind::synth_to_real};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::real_only;
  std::string family;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  // When set, every benign draw uses this seed instead of one derived from
  // `seed`, so scenarios of a family share nested benign samples.
  std::optional<std::uint64_t> benign_seed;
  // Drop exact duplicate feature rows (first occurrence wins, malware before
  // benign) before splitting.
  bool drop_duplicate_rows = false;

  void check() const;
};

struct Split {
  FeatureMatrix matrix;
  std::vector<Provenance> provenance;
  // Row index inside the source matrix named by the provenance tag.
  std::vector<std::size_t> source_rows;

  std::size_t positives() const;
  std::size_t negatives() const;
};

struct SplitBundle {
  ScenarioSpec spec;
  Split train;
  std::optional<Split> val;
  Split test;
};

struct StratifiedIndices {
  std::vector<std::size_t> part_a;
  std::vector<std::size_t> part_b;
};

// Rows routed to part_a for one class: floor(fraction * n), except an exact
// half which rounds up.
std::size_t stratified_take(std::size_t class_rows, double fraction);

// Per-class seeded shuffle, then stratified_take rows of each class go to
// part_a. Both parts are returned in ascending row order. Throws DataError
// when a class has fewer than 2 rows.
StratifiedIndices stratified_split(std::span<const int> labels, double fraction,
                                   std::uint64_t seed);

SplitBundle build_scenario_real(const FeatureMatrix& real_mal, const FeatureMatrix& benign_pool,
                                const ScenarioSpec& spec);

SplitBundle build_scenario_augmented(const FeatureMatrix& real_mal, const FeatureMatrix& synth_mal,
                                     const FeatureMatrix& benign_pool, const ScenarioSpec& spec);

SplitBundle build_scenario_synth_to_real(const FeatureMatrix& synth_mal,
                                         const FeatureMatrix& real_mal,
                                         const FeatureMatrix& benign_pool,
                                         const ScenarioSpec& spec);

// ---- row hashing and leakage --------------------------------------------

inline constexpr std::string_view kRowHashAlgorithm = "fnv1a64/le-int64-fixed9";

// Canonical cell encoding: each cell rounded to 9 decimal places and written
// as a little-endian int64 of round(x * 1e9). Cells too large for that are
// written as a 0xff marker followed by the little-endian IEEE-754 bits.
std::string canonical_row_bytes(std::span<const double> row);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t row_hash(std::span<const double> row);

using RowHasher = std::function<std::uint64_t(std::span<const double>)>;

std::vector<std::uint64_t> row_hashes(const FeatureMatrix& matrix, const RowHasher& hasher = row_hash);

struct LeakFinding {
  std::string split_a;
  std::size_t row_a = 0;
  std::string split_b;
  std::size_t row_b = 0;
  std::uint64_t hash = 0;
};

struct LeakageReport {
  std::vector<LeakFinding> findings;
  // Hash matches whose rows differed on direct comparison.
  std::size_t hash_collisions = 0;
  bool clean() const { return findings.empty(); }
  std::string describe() const;
};

// Cross-split hash matches are confirmed by comparing canonical encodings, so
// a collision between distinct rows is never reported.
LeakageReport check_leakage(const SplitBundle& bundle, const RowHasher& hasher = row_hash);

// ---- persistence ---------------------------------------------------------

// Writes train.csv / val.csv / test.csv (features, label, provenance,
// source_row) and a key=value manifest.txt into dir.
void write_bundle(const SplitBundle& bundle, const std::string& dir);
SplitBundle read_bundle(const std::string& dir);

// Writes a matrix as CSV with a header row; labels are not included.
void write_matrix_csv(const FeatureMatrix& matrix, const std::string& path);
// Reads a header + numeric CSV written by write_matrix_csv; every row gets `label`.
FeatureMatrix read_matrix_csv(const std::string& path, int label);

}  // namespace droidsynth
