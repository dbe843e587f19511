#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "droidsynth/models/classifier.hpp"
#include "droidsynth/models/grid_search.hpp"
#include "droidsynth/provider.hpp"
#include "droidsynth/report.hpp"
#include "droidsynth/sanitizer.hpp"
#include "droidsynth/scenarios.hpp"

namespace droidsynth {

enum class BenignSampling { per_scenario, shared };

struct FamilyProfile {
  std::string name;           // value of the family tag column, e.g. "BankBot"
  std::string alias;          // empty: the built-in default for the family
  std::string rules_path;     // empty: built-in rules
  std::size_t finetune_samples = 50;
  int finetune_epochs = 1;
  std::size_t generate_count = 400;
  std::string model_id;       // empty: generation.model_id (e.g. a fine-tuned id)

  std::string slug() const { return family_slug(name); }
  SanitizationMap sanitization_map() const;
};

/// Run configuration, loaded from one JSON file. Relative paths resolve
/// against the file's directory. Keys:
///   out_dir, malware_csv, benign_csv, seed, published_dataset,
///   benign_sampling ("per_scenario" | "shared"), drop_duplicate_rows,
///   zero_fraction_threshold, train_fraction, cv_folds, bootstrap_resamples,
///   max_threads, generation {endpoint_url, model_id, temperature, max_tokens,
///   timeout_seconds, max_retries, initial_backoff_seconds, max_in_flight,
///   api_key_env}, families [{name, alias, rules, finetune_samples,
///   finetune_epochs, generate_count, model_id}], classifiers [...],
///   scenarios [...], grids {kind: ["k=3", ...]}.
/// Airpush families default to 150 fine-tuning samples and 3 epochs.
struct RunProfile {
  std::filesystem::path out_dir = "out";
  std::filesystem::path malware_csv;
  std::filesystem::path benign_csv;
  std::uint64_t seed = 0;
  // Published row and column counts are enforced instead of warned about.
  bool published_dataset = false;
  BenignSampling benign_sampling = BenignSampling::per_scenario;
  bool drop_duplicate_rows = false;
  double zero_fraction_threshold = 0.70;
  double train_fraction = 0.8;
  int cv_folds = 5;
  int bootstrap_resamples = 1000;
  std::size_t max_threads = 0;
  GenerationConfig generation;
  std::vector<FamilyProfile> families;
  std::vector<models::ClassifierKind> classifiers;
  std::vector<ScenarioKind> scenarios;
  models::HyperGrid grid = models::HyperGrid::defaults();
  nlohmann::json snapshot;  // the parsed file, recorded in the manifest

  static RunProfile from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunProfile load(const std::filesystem::path& path);

  // Throws UsageError when an input path is missing or a count is not positive.
  void check_inputs() const;
  const FamilyProfile& family(std::string_view name) const;
  std::filesystem::path stage_dir(const FamilyProfile& family, std::string_view stage) const;
};

std::string sha256_file(const std::filesystem::path& path);

/// Append-only JSON-lines log at out_dir/manifest.jsonl, one entry per stage.
class RunManifest {
 public:
  explicit RunManifest(std::filesystem::path out_dir);

  struct Entry {
    std::string stage;
    std::string family;
    std::uint64_t seed = 0;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    double wall_seconds = 0.0;
  };

  // Digests every input and output file; paths are stored relative to out_dir
  // when they live under it.
  void append(const Entry& entry, const nlohmann::json& profile_snapshot);

  std::vector<nlohmann::json> read() const;
  // Recomputes digests of recorded outputs; returns the paths that differ.
  std::vector<std::string> verify() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path out_dir_;
  std::filesystem::path path_;
};

// Subcommands. Each runs for one family (or every family when empty) and
// writes under out_dir/{family}/{stage}/.
struct StageOptions {
  std::vector<std::string> families;  // empty: all in the profile
};

struct GenerateOptions : StageOptions {
  bool mock = false;
  std::optional<std::size_t> count;  // overrides FamilyProfile::generate_count
};

struct EvaluateOptions : StageOptions {
  std::vector<ScenarioKind> scenarios;                 // empty: profile list
  std::vector<models::ClassifierKind> classifiers;     // empty: profile list
};

void cmd_prepare(const RunProfile& profile, const StageOptions& options = {});
void cmd_build_corpus(const RunProfile& profile, const StageOptions& options = {});
// Returns job ids in family order.
std::vector<std::string> cmd_submit_finetune(const RunProfile& profile,
                                             const StageOptions& options = {});
void cmd_generate(const RunProfile& profile, const GenerateOptions& options = {});
void cmd_validate(const RunProfile& profile, const StageOptions& options = {});
void cmd_scenarios(const RunProfile& profile, const EvaluateOptions& options = {});
// Throws LeakageError when a bundle's splits share a row.
std::vector<ReportCell> cmd_evaluate(const RunProfile& profile, const EvaluateOptions& options = {});
void cmd_report(const RunProfile& profile, const StageOptions& options = {});

// Writes a sample table as CSV with its original header and raw cells.
void write_sample_table(const SampleTable& table, const std::filesystem::path& path);

}  // namespace droidsynth
