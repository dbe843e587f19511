#include "droidsynth/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "droidsynth/csv.hpp"
#include "droidsynth/error.hpp"
#include "droidsynth/log.hpp"
#include "droidsynth/metrics.hpp"
#include "droidsynth/rng.hpp"
#include "droidsynth/synth_gen.hpp"

namespace droidsynth {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed streams derived from the profile seed, one per random stage.
enum SeedStream : std::uint64_t {
  kPrepareBenign = 60,
  kCorpusSample = 61,
  kMockGenerate = 62,
  kSharedBenign = 63,
  kScenarioBase = 70,
  kCvFolds = 80,
  kModelBase = 90,
  kBootstrap = 100,
};

struct PublishedFamily {
  std::string_view name;
  std::size_t rows;
};
constexpr PublishedFamily kPublishedFamilies[] = {
    {"BankBot", 1297}, {"Locker/SLocker", 1846}, {"Airpush/StopSMS", 7775}};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename T>
T get_or(const json& j, std::string_view key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw UsageError("profile key '" + std::string(key) + "' has the wrong type");
  }
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known,
                         std::string_view where) {
  if (!j.is_object()) throw UsageError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += s + '\n';
  return out;
}

void require_file(const fs::path& path, std::string_view produced_by) {
  if (!fs::is_regular_file(path)) {
    throw DataError("missing " + path.string() + " (run '" + std::string(produced_by) + "' first)");
  }
}

std::vector<const FamilyProfile*> select_families(const RunProfile& profile,
                                                  const StageOptions& options) {
  std::vector<const FamilyProfile*> out;
  if (options.families.empty()) {
    for (const auto& f : profile.families) out.push_back(&f);
  } else {
    for (const auto& name : options.families) out.push_back(&profile.family(name));
  }
  if (out.empty()) throw UsageError("profile lists no families");
  return out;
}

std::size_t scenario_index(ScenarioKind k) {
  return static_cast<std::size_t>(std::find(std::begin(kAllScenarios), std::end(kAllScenarios), k) -
                                  std::begin(kAllScenarios));
}

std::size_t classifier_index(models::ClassifierKind k) {
  return static_cast<std::size_t>(std::find(std::begin(models::kAllClassifiers),
                                            std::end(models::kAllClassifiers), k) -
                                  std::begin(models::kAllClassifiers));
}

SampleTable load_family_rows(const RunProfile& profile, const FamilyProfile& family) {
  const auto path = profile.stage_dir(family, "prepare") / "family_rows.csv";
  require_file(path, "prepare");
  return load_table(path.string(), std::nullopt, 1);
}

std::vector<std::string> retained_columns(const RunProfile& profile, const FamilyProfile& family) {
  const auto path = profile.stage_dir(family, "prepare") / "columns.txt";
  require_file(path, "prepare");
  return read_lines(path);
}

ordered_json load_exemplar(const RunProfile& profile, const FamilyProfile& family) {
  const auto path = profile.stage_dir(family, "corpus") / "exemplar.json";
  require_file(path, "build-corpus");
  return ordered_json::parse(read_text(path));
}

GenerationConfig family_generation(const RunProfile& profile, const FamilyProfile& family,
                                   const SanitizationMap& map) {
  GenerationConfig config = profile.generation;
  if (!family.model_id.empty()) config.model_id = family.model_id;
  config.family_alias = map.alias();
  return config;
}

ScenarioSpec scenario_spec(const RunProfile& profile, const FamilyProfile& family, ScenarioKind kind) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.family = family.name;
  spec.seed = mix_seed(profile.seed, kScenarioBase + scenario_index(kind));
  spec.train_fraction = profile.train_fraction;
  spec.drop_duplicate_rows = profile.drop_duplicate_rows;
  if (profile.benign_sampling == BenignSampling::shared) {
    spec.benign_seed = mix_seed(profile.seed, kSharedBenign);
  }
  return spec;
}

}  // namespace

// ---- profile --------------------------------------------------------------

SanitizationMap FamilyProfile::sanitization_map() const {
  if (!rules_path.empty()) return SanitizationMap::from_rules_file(rules_path, name);
  return SanitizationMap::for_family(name, alias);
}

RunProfile RunProfile::from_json(const json& j, const fs::path& base_dir) {
  reject_unknown_keys(j,
                      {"out_dir", "malware_csv", "benign_csv", "seed", "published_dataset",
                       "benign_sampling", "drop_duplicate_rows", "zero_fraction_threshold",
                       "train_fraction", "cv_folds", "bootstrap_resamples", "max_threads",
                       "generation", "families", "classifiers", "scenarios", "grids"},
                      "profile");
  RunProfile p;
  p.snapshot = j;
  p.out_dir = resolve(base_dir, get_or<std::string>(j, "out_dir", "out"));
  p.malware_csv = resolve(base_dir, get_or<std::string>(j, "malware_csv", ""));
  p.benign_csv = resolve(base_dir, get_or<std::string>(j, "benign_csv", ""));
  p.seed = get_or<std::uint64_t>(j, "seed", 0);
  p.published_dataset = get_or<bool>(j, "published_dataset", false);
  const auto sampling = get_or<std::string>(j, "benign_sampling", "per_scenario");
  if (sampling == "per_scenario") {
    p.benign_sampling = BenignSampling::per_scenario;
  } else if (sampling == "shared") {
    p.benign_sampling = BenignSampling::shared;
  } else {
    throw UsageError("benign_sampling must be per_scenario or shared, got '" + sampling + "'");
  }
  p.drop_duplicate_rows = get_or<bool>(j, "drop_duplicate_rows", false);
  p.zero_fraction_threshold = get_or<double>(j, "zero_fraction_threshold", 0.70);
  p.train_fraction = get_or<double>(j, "train_fraction", 0.8);
  p.cv_folds = get_or<int>(j, "cv_folds", 5);
  p.bootstrap_resamples = get_or<int>(j, "bootstrap_resamples", 1000);
  p.max_threads = get_or<std::size_t>(j, "max_threads", 0);
  if (!(p.zero_fraction_threshold >= 0.0 && p.zero_fraction_threshold <= 1.0)) {
    throw UsageError("zero_fraction_threshold must be within [0, 1]");
  }
  if (!(p.train_fraction > 0.0 && p.train_fraction < 1.0)) {
    throw UsageError("train_fraction must be within (0, 1)");
  }
  if (p.cv_folds < 2) throw UsageError("cv_folds must be >= 2");
  if (p.bootstrap_resamples < 1) throw UsageError("bootstrap_resamples must be >= 1");

  if (auto it = j.find("generation"); it != j.end()) {
    const json& g = *it;
    reject_unknown_keys(g,
                        {"endpoint_url", "model_id", "temperature", "max_tokens", "timeout_seconds",
                         "max_retries", "initial_backoff_seconds", "max_in_flight", "api_key_env"},
                        "generation");
    auto& c = p.generation;
    c.endpoint_url = get_or<std::string>(g, "endpoint_url", c.endpoint_url);
    c.model_id = get_or<std::string>(g, "model_id", c.model_id);
    c.temperature = get_or<double>(g, "temperature", c.temperature);
    c.max_tokens = get_or<std::int64_t>(g, "max_tokens", c.max_tokens);
    c.request_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(
        1000.0 * get_or<double>(g, "timeout_seconds", c.request_timeout.count() / 1000.0)));
    c.max_retries = get_or<int>(g, "max_retries", c.max_retries);
    c.initial_backoff = std::chrono::milliseconds(static_cast<std::int64_t>(
        1000.0 * get_or<double>(g, "initial_backoff_seconds", c.initial_backoff.count() / 1000.0)));
    c.max_in_flight = get_or<int>(g, "max_in_flight", c.max_in_flight);
    c.api_key_env = get_or<std::string>(g, "api_key_env", c.api_key_env);
  }
  p.generation.check();

  for (const auto& f : j.value("families", json::array())) {
    reject_unknown_keys(f,
                        {"name", "alias", "rules", "finetune_samples", "finetune_epochs",
                         "generate_count", "model_id"},
                        "families[]");
    FamilyProfile fam;
    fam.name = get_or<std::string>(f, "name", "");
    if (fam.name.empty()) throw UsageError("every family needs a name");
    const bool airpush = fam.name.starts_with("Airpush");
    fam.alias = get_or<std::string>(f, "alias", "");
    const auto rules = get_or<std::string>(f, "rules", "");
    fam.rules_path = rules.empty() ? std::string{} : resolve(base_dir, rules).string();
    fam.finetune_samples = get_or<std::size_t>(f, "finetune_samples", airpush ? 150 : 50);
    fam.finetune_epochs = get_or<int>(f, "finetune_epochs", airpush ? 3 : 1);
    fam.generate_count = get_or<std::size_t>(f, "generate_count", 400);
    fam.model_id = get_or<std::string>(f, "model_id", "");
    if (fam.finetune_samples == 0 || fam.finetune_epochs < 1 || fam.generate_count == 0) {
      throw UsageError("family " + fam.name + ": counts must be positive");
    }
    for (const auto& other : p.families) {
      if (other.slug() == fam.slug()) throw UsageError("duplicate family " + fam.name);
    }
    p.families.push_back(std::move(fam));
  }

  for (const auto& c : j.value("classifiers", json::array())) {
    p.classifiers.push_back(models::classifier_from_string(c.get<std::string>()));
  }
  if (p.classifiers.empty()) p.classifiers.assign(std::begin(models::kAllClassifiers), std::end(models::kAllClassifiers));
  for (const auto& s : j.value("scenarios", json::array())) {
    p.scenarios.push_back(scenario_from_string(s.get<std::string>()));
  }
  if (p.scenarios.empty()) p.scenarios.assign(std::begin(kAllScenarios), std::end(kAllScenarios));

  if (auto it = j.find("grids"); it != j.end()) {
    if (!it->is_object()) throw UsageError("grids must be an object of kind -> list");
    for (const auto& [kind_name, points] : it->items()) {
      const auto kind = models::classifier_from_string(kind_name);
      std::vector<models::ClassifierSpec> specs;
      for (const auto& point : points) {
        specs.push_back(models::ClassifierSpec::parse(kind, point.get<std::string>()));
      }
      p.grid.set(kind, std::move(specs));
    }
  }
  return p;
}

RunProfile RunProfile::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open profile " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("profile " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void RunProfile::check_inputs() const {
  for (const auto& [label, path] : {std::pair{"malware_csv", malware_csv}, std::pair{"benign_csv", benign_csv}}) {
    if (path.empty()) throw UsageError(std::string("profile has no ") + label);
    if (!fs::is_regular_file(path)) {
      throw UsageError(std::string(label) + " does not exist: " + path.string());
    }
  }
  for (const auto& f : families) {
    if (!f.rules_path.empty() && !fs::is_regular_file(f.rules_path)) {
      throw UsageError("rules file does not exist: " + f.rules_path);
    }
  }
}

const FamilyProfile& RunProfile::family(std::string_view name) const {
  for (const auto& f : families) {
    if (f.name == name || f.slug() == name) return f;
  }
  throw UsageError("family '" + std::string(name) + "' is not in the profile");
}

fs::path RunProfile::stage_dir(const FamilyProfile& family, std::string_view stage) const {
  return out_dir / family.slug() / std::string(stage);
}

// ---- manifest -------------------------------------------------------------

std::string sha256_file(const fs::path& path) {
  const std::string data = read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw DataError("sha256 failed for " + path.string());
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

RunManifest::RunManifest(fs::path out_dir)
    : out_dir_(std::move(out_dir)), path_(out_dir_ / "manifest.jsonl") {}

void RunManifest::append(const Entry& entry, const json& profile_snapshot) {
  auto relative = [&](const fs::path& p) {
    auto rel = p.lexically_relative(out_dir_);
    return (!rel.empty() && *rel.begin() != "..") ? rel.generic_string() : p.generic_string();
  };
  nlohmann::ordered_json rec;
  rec["stage"] = entry.stage;
  rec["family"] = entry.family;
  rec["seed"] = entry.seed;
  rec["profile"] = profile_snapshot;
  auto digests = [&](const std::vector<fs::path>& paths) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& p : paths) out[relative(p)] = sha256_file(p);
    return out;
  };
  rec["inputs"] = digests(entry.inputs);
  rec["outputs"] = digests(entry.outputs);
  rec["counts"] = entry.counts;
  rec["wall_seconds"] = entry.wall_seconds;
  fs::create_directories(out_dir_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot append to " + path_.string());
  out << rec.dump() << '\n';
}

std::vector<json> RunManifest::read() const {
  std::vector<json> out;
  if (!fs::exists(path_)) return out;
  for (const auto& line : read_lines(path_)) out.push_back(json::parse(line));
  return out;
}

std::vector<std::string> RunManifest::verify() const {
  // Later entries supersede earlier ones for the same output path.
  std::map<std::string, std::string> latest;
  for (const auto& rec : read()) {
    for (const auto& [p, digest] : rec.at("outputs").items()) latest[p] = digest.get<std::string>();
  }
  std::vector<std::string> bad;
  for (const auto& [p, digest] : latest) {
    fs::path full = fs::path(p).is_absolute() ? fs::path(p) : out_dir_ / p;
    if (!fs::exists(full) || sha256_file(full) != digest) bad.push_back(p);
  }
  return bad;
}

void write_sample_table(const SampleTable& table, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  csv::write_record(out, table.schema.names());
  csv::Record rec;
  for (const auto& row : table.rows) {
    rec.clear();
    for (const auto& cell : row) {
      rec.push_back(std::holds_alternative<std::string>(cell) ? std::get<std::string>(cell)
                                                              : csv::format_number(std::get<double>(cell)));
    }
    csv::write_record(out, rec);
  }
}

// ---- stages ---------------------------------------------------------------

void cmd_prepare(const RunProfile& profile, const StageOptions& options) {
  const auto families = select_families(profile, options);
  profile.check_inputs();
  const auto start = Clock::now();
  const SampleTable malware = load_table(profile.malware_csv.string(), std::nullopt, 1);
  const SampleTable benign_raw = load_table(profile.benign_csv.string(), std::nullopt, 0);
  check_published_count("malware header columns", malware.schema.size(), kPublishedHeaderColumns,
                        profile.published_dataset);

  // Benign preparation is shared by every family.
  const FeatureMatrix benign_all =
      coerce_numeric(impute_none_counts(drop_excluded_columns(benign_raw))).with_labels(0);
  const double load_seconds = seconds_since(start);

  for (const auto* family : families) {
    const auto t0 = Clock::now();
    const auto dir = profile.stage_dir(*family, "prepare");
    fs::create_directories(dir);

    const SampleTable fam = select_family(malware, family->name);
    for (const auto& pub : kPublishedFamilies) {
      if (pub.name == family->name) {
        check_published_count(family->name + " rows", fam.num_rows(), pub.rows,
                              profile.published_dataset);
      }
    }
    write_sample_table(fam, dir / "family_rows.csv");

    const SampleTable excluded = drop_excluded_columns(fam);
    check_published_count("columns after exclusion", excluded.schema.size(),
                          kPublishedColumnsAfterExclusion, profile.published_dataset);
    const FeatureMatrix fam_matrix = coerce_numeric(impute_none_counts(excluded)).with_labels(1);
    const FeatureMatrix benign = benign_all.select_columns(fam_matrix.feature_names());

    if (benign.rows() < fam_matrix.rows()) {
      throw DataError(family->name + ": benign table has " + std::to_string(benign.rows()) +
                      " rows, fewer than the " + std::to_string(fam_matrix.rows()) + " malware rows");
    }
    const auto benign_idx = sample_without_replacement(benign.rows(), fam_matrix.rows(),
                                                       mix_seed(profile.seed, kPrepareBenign));
    const FeatureMatrix balanced = FeatureMatrix::concat(fam_matrix, benign.select_rows(benign_idx));
    const FilterResult filtered = filter_sparse_columns(balanced, profile.zero_fraction_threshold);
    const auto& kept = filtered.matrix.feature_names();
    check_published_count("columns after sparse filtering", kept.size(),
                          kPublishedColumnsAfterFilter, profile.published_dataset);
    check_published_count("columns dropped by sparse filtering", filtered.dropped.size(),
                          kPublishedColumnsAfterExclusion - kPublishedColumnsAfterFilter,
                          profile.published_dataset);

    write_matrix_csv(fam_matrix.select_columns(kept), (dir / "real_malware.csv").string());
    write_matrix_csv(benign.select_columns(kept), (dir / "benign_pool.csv").string());
    write_text(dir / "columns.txt", join_lines(kept));
    write_text(dir / "dropped_columns.txt", join_lines(filtered.dropped));

    std::ostringstream side;
    side << "family=" << family->name << '\n';
    side << "seed=" << profile.seed << '\n';
    side << "excluded_columns=";
    for (std::size_t i = 0; i < kExcludedMetadataColumns.size(); ++i) {
      side << (i ? "," : "") << kExcludedMetadataColumns[i];
    }
    side << '\n';
    side << "header_columns=" << malware.schema.size() << '\n';
    side << "columns_after_exclusion=" << excluded.schema.size() << '\n';
    side << "zero_fraction_threshold=" << csv::format_number(profile.zero_fraction_threshold) << '\n';
    side << "columns_after_filter=" << kept.size() << '\n';
    side << "columns_dropped=" << filtered.dropped.size() << '\n';
    side << "malware_rows=" << fam_matrix.rows() << '\n';
    side << "benign_pool_rows=" << benign.rows() << '\n';
    side << "balanced_benign_rows=" << benign_idx.size() << '\n';
    side << "standardizer_stdev=population\n";
    for (const auto& c : category_counts(kept)) {
      side << "category." << to_string(c.category) << '=' << c.count << '\n';
    }
    write_text(dir / "prepare.txt", side.str());

    RunManifest::Entry e;
    e.stage = "prepare";
    e.family = family->name;
    e.seed = profile.seed;
    e.inputs = {profile.malware_csv, profile.benign_csv};
    e.outputs = {dir / "family_rows.csv", dir / "real_malware.csv", dir / "benign_pool.csv",
                 dir / "columns.txt", dir / "dropped_columns.txt", dir / "prepare.txt"};
    e.counts["header_columns"] = malware.schema.size();
    e.counts["columns_after_exclusion"] = excluded.schema.size();
    e.counts["columns_after_filter"] = kept.size();
    e.counts["columns_dropped"] = filtered.dropped.size();
    e.counts["malware_rows"] = fam_matrix.rows();
    e.counts["benign_pool_rows"] = benign.rows();
    e.wall_seconds = seconds_since(t0) + load_seconds;
    RunManifest(profile.out_dir).append(e, profile.snapshot);
  }
}

void cmd_build_corpus(const RunProfile& profile, const StageOptions& options) {
  for (const auto* family : select_families(profile, options)) {
    const auto t0 = Clock::now();
    const SampleTable fam = load_family_rows(profile, *family);
    SanitizationMap map = family->sanitization_map();
    const auto layout = RecordLayout::from_schema(fam.schema, map);
    const SampleTable sample = subsample_representatives(fam, family->finetune_samples,
                                                         mix_seed(profile.seed, kCorpusSample));
    const auto corpus = build_finetune_corpus(sample, map, map.alias());
    const auto dir = profile.stage_dir(*family, "corpus");
    write_text(dir / "finetune.jsonl", serialize_corpus(corpus));
    write_text(dir / "exemplar.json",
               compact_json_dumps(row_to_record(sample, 0, layout, map, map.alias())) + "\n");
    std::string skip;
    for (const auto& name : map.skip_list()) skip += name + '\n';
    write_text(dir / "skip_list.txt", skip);

    RunManifest::Entry e;
    e.stage = "build-corpus";
    e.family = family->name;
    e.seed = profile.seed;
    e.inputs = {profile.stage_dir(*family, "prepare") / "family_rows.csv"};
    e.outputs = {dir / "finetune.jsonl", dir / "exemplar.json", dir / "skip_list.txt"};
    e.counts["examples"] = corpus.size();
    e.counts["keys"] = layout.keys.size();
    e.counts["alias"] = map.alias();
    e.wall_seconds = seconds_since(t0);
    RunManifest(profile.out_dir).append(e, profile.snapshot);
  }
}

std::vector<std::string> cmd_submit_finetune(const RunProfile& profile, const StageOptions& options) {
  std::vector<std::string> jobs;
  for (const auto* family : select_families(profile, options)) {
    const auto t0 = Clock::now();
    const auto corpus = profile.stage_dir(*family, "corpus") / "finetune.jsonl";
    require_file(corpus, "build-corpus");
    const SanitizationMap map = family->sanitization_map();
    ProviderClient client(family_generation(profile, *family, map));
    const std::string job = client.submit_finetune_job(corpus.string(), family->finetune_epochs);
    const auto dir = profile.stage_dir(*family, "finetune");
    nlohmann::ordered_json rec = {{"job_id", job},
                                  {"base_model", client.config().model_id},
                                  {"epochs", family->finetune_epochs}};
    write_text(dir / "job.json", rec.dump(2) + "\n");
    jobs.push_back(job);

    RunManifest::Entry e;
    e.stage = "submit-finetune";
    e.family = family->name;
    e.inputs = {corpus};
    e.outputs = {dir / "job.json"};
    e.counts["epochs"] = family->finetune_epochs;
    e.counts["job_id"] = job;
    e.wall_seconds = seconds_since(t0);
    RunManifest(profile.out_dir).append(e, profile.snapshot);
  }
  return jobs;
}

void cmd_generate(const RunProfile& profile, const GenerateOptions& options) {
  for (const auto* family : select_families(profile, options)) {
    const auto t0 = Clock::now();
    const SampleTable fam = load_family_rows(profile, *family);
    SanitizationMap map = family->sanitization_map();
    const auto layout = RecordLayout::from_schema(fam.schema, map);
    const ordered_json exemplar = load_exemplar(profile, *family);
    const std::size_t n = options.count.value_or(family->generate_count);
    if (n == 0) throw UsageError("generate: record count must be positive");

    std::vector<std::string> raw;
    std::size_t attempts = 0;
    const std::uint64_t gen_seed = mix_seed(profile.seed, kMockGenerate);
    if (options.mock) {
      const auto stats = compute_column_stats(fam);
      for (std::size_t i = 1; i <= n; ++i) {
        raw.push_back(mock_generate_record(layout, stats, mix_seed(gen_seed, i), map.alias()).raw_text);
      }
    } else {
      ProviderClient client(family_generation(profile, *family, map));
      raw = generate_batch(
          client,
          [&](std::size_t record_num) {
            return build_generation_prompts(layout, exemplar, map.alias(), record_num);
          },
          1, n);
      attempts = client.attempts();
    }

    const auto dir = profile.stage_dir(*family, "generate");
    std::string lines;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      lines += json{{"record_num", i + 1}, {"raw_text", raw[i]}}.dump() + '\n';
    }
    write_text(dir / "raw.jsonl", lines);
    // The first prompt pair, for inspection.
    const auto prompts = build_generation_prompts(layout, exemplar, map.alias(), 1);
    write_text(dir / "prompt_system.txt", prompts.system + "\n");
    write_text(dir / "prompt_user.txt", prompts.user + "\n");

    RunManifest::Entry e;
    e.stage = "generate";
    e.family = family->name;
    e.seed = options.mock ? gen_seed : 0;
    e.inputs = {profile.stage_dir(*family, "prepare") / "family_rows.csv",
                profile.stage_dir(*family, "corpus") / "exemplar.json"};
    e.outputs = {dir / "raw.jsonl", dir / "prompt_system.txt", dir / "prompt_user.txt"};
    e.counts["records"] = raw.size();
    e.counts["mock"] = options.mock;
    e.counts["model_id"] = options.mock ? std::string("mock") : family_generation(profile, *family, map).model_id;
    e.counts["http_attempts"] = attempts;
    e.wall_seconds = seconds_since(t0);
    RunManifest(profile.out_dir).append(e, profile.snapshot);
  }
}

void cmd_validate(const RunProfile& profile, const StageOptions& options) {
  for (const auto* family : select_families(profile, options)) {
    const auto t0 = Clock::now();
    const SampleTable fam = load_family_rows(profile, *family);
    SanitizationMap map = family->sanitization_map();
    const auto layout = RecordLayout::from_schema(fam.schema, map);
    const auto columns = retained_columns(profile, *family);
    const auto raw_path = profile.stage_dir(*family, "generate") / "raw.jsonl";
    require_file(raw_path, "generate");

    std::vector<CandidateRecord> passed;
    std::size_t accepted = 0, repaired = 0, rejected = 0, total = 0;
    std::string log_lines;
    for (const auto& line : read_lines(raw_path)) {
      json entry;
      try {
        entry = json::parse(line);
      } catch (const json::exception& e) {
        throw DataError(raw_path.string() + ": malformed cache line " + std::to_string(total + 1));
      }
      ++total;
      const auto report = validate_record(CandidateRecord::from_text(entry.at("raw_text").get<std::string>()),
                                          layout);
      ordered_json logged = report.to_json();
      logged.erase("record");
      ordered_json rec;
      rec["record_num"] = entry.at("record_num");
      for (auto& [k, v] : logged.items()) rec[k] = v;
      log_lines += rec.dump() + '\n';
      switch (report.verdict) {
        case Verdict::accepted: ++accepted; break;
        case Verdict::repaired: ++repaired; break;
        case Verdict::rejected: ++rejected; continue;
      }
      passed.push_back(CandidateRecord::from_values(report.record));
    }
    const auto dedup = dedup_records(passed, layout.hash_key);
    std::vector<ordered_json> values;
    ordered_json array = ordered_json::array();
    for (const auto& r : dedup.kept) {
      values.push_back(r.values);
      array.push_back(r.values);
    }

    const auto dir = profile.stage_dir(*family, "validate");
    write_text(dir / "accepted.json", array.dump(1) + "\n");
    write_text(dir / "validation_log.jsonl", log_lines);
    if (!values.empty()) {
      write_matrix_csv(records_to_matrix(values, map, columns), (dir / "synthetic.csv").string());
    } else {
      log::warn(family->name + ": no synthetic records survived validation");
      write_matrix_csv(FeatureMatrix(columns, {}, {}), (dir / "synthetic.csv").string());
    }

    RunManifest::Entry e;
    e.stage = "validate";
    e.family = family->name;
    e.inputs = {raw_path, profile.stage_dir(*family, "prepare") / "columns.txt"};
    e.outputs = {dir / "accepted.json", dir / "validation_log.jsonl", dir / "synthetic.csv"};
    e.counts["candidates"] = total;
    e.counts["accepted"] = accepted;
    e.counts["repaired"] = repaired;
    e.counts["rejected"] = rejected;
    e.counts["removed_count"] = dedup.removed_count;
    e.counts["kept"] = dedup.kept.size();
    e.wall_seconds = seconds_since(t0);
    RunManifest(profile.out_dir).append(e, profile.snapshot);
  }
}

void cmd_scenarios(const RunProfile& profile, const EvaluateOptions& options) {
  const auto kinds = options.scenarios.empty() ? profile.scenarios : options.scenarios;
  for (const auto* family : select_families(profile, options)) {
    const auto prep = profile.stage_dir(*family, "prepare");
    require_file(prep / "real_malware.csv", "prepare");
    const FeatureMatrix real = read_matrix_csv((prep / "real_malware.csv").string(), 1);
    const FeatureMatrix benign = read_matrix_csv((prep / "benign_pool.csv").string(), 0);
    const auto synth_path = profile.stage_dir(*family, "validate") / "synthetic.csv";
    std::optional<FeatureMatrix> synth;

    for (auto kind : kinds) {
      const auto t0 = Clock::now();
      const ScenarioSpec spec = scenario_spec(profile, *family, kind);
      SplitBundle bundle;
      if (kind == ScenarioKind::real_only) {
        bundle = build_scenario_real(real, benign, spec);
      } else {
        if (!synth) {
          require_file(synth_path, "validate");
          synth = read_matrix_csv(synth_path.string(), 1);
        }
        bundle = kind == ScenarioKind::real_plus_synth
                     ? build_scenario_augmented(real, *synth, benign, spec)
                     : build_scenario_synth_to_real(*synth, real, benign, spec);
      }
      const auto dir = profile.stage_dir(*family, "scenarios") / std::string(to_string(kind));
      write_bundle(bundle, dir.string());

      RunManifest::Entry e;
      e.stage = "scenarios";
      e.family = family->name;
      e.seed = spec.seed;
      e.inputs = {prep / "real_malware.csv", prep / "benign_pool.csv"};
      if (kind != ScenarioKind::real_only) e.inputs.push_back(synth_path);
      e.outputs = {dir / "train.csv", dir / "test.csv", dir / "manifest.txt"};
      if (bundle.val) e.outputs.push_back(dir / "val.csv");
      e.counts["scenario"] = std::string(to_string(kind));
      e.counts["train_rows"] = bundle.train.matrix.rows();
      e.counts["val_rows"] = bundle.val ? bundle.val->matrix.rows() : 0;
      e.counts["test_rows"] = bundle.test.matrix.rows();
      e.wall_seconds = seconds_since(t0);
      RunManifest(profile.out_dir).append(e, profile.snapshot);
    }
  }
}

std::vector<ReportCell> cmd_evaluate(const RunProfile& profile, const EvaluateOptions& options) {
  const auto kinds = options.scenarios.empty() ? profile.scenarios : options.scenarios;
  const auto classifiers = options.classifiers.empty() ? profile.classifiers : options.classifiers;
  std::vector<ReportCell> all_cells;
  for (const auto* family : select_families(profile, options)) {
    std::vector<ReportCell> cells;
    const auto eval_dir = profile.stage_dir(*family, "evaluate");
    for (auto kind : kinds) {
      const auto bundle_dir = profile.stage_dir(*family, "scenarios") / std::string(to_string(kind));
      require_file(bundle_dir / "manifest.txt", "scenarios");
      const SplitBundle bundle = read_bundle(bundle_dir.string());
      const LeakageReport leaks = check_leakage(bundle);
      if (!leaks.clean()) {
        throw LeakageError(family->name + "/" + std::string(to_string(kind)) + ": " + leaks.describe());
      }
      const auto sidx = scenario_index(kind);
      for (auto clf : classifiers) {
        const auto t0 = Clock::now();
        const auto cidx = classifier_index(clf);
        auto grid = profile.grid.points(clf);
        for (auto& spec : grid) spec.seed = mix_seed(mix_seed(profile.seed, kModelBase + cidx), sidx);
        models::CvOptions cv_opts;
        cv_opts.folds = profile.cv_folds;
        cv_opts.seed = mix_seed(profile.seed, kCvFolds + sidx);
        cv_opts.max_threads = profile.max_threads;
        const auto cv = models::grid_search_cv(grid, bundle.train.matrix, cv_opts);

        const std::uint64_t boot_seed = mix_seed(mix_seed(profile.seed, kBootstrap + sidx), cidx);
        auto score = [&](const Split& split, std::uint64_t seed) {
          const auto proba = cv.model.predict_proba(split.matrix);
          std::vector<int> pred(proba.size());
          for (std::size_t i = 0; i < proba.size(); ++i) pred[i] = models::label_from_probability(proba[i]);
          return evaluate_predictions(split.matrix.labels(), pred, proba, seed, profile.bootstrap_resamples);
        };
        ReportCell cell;
        cell.family = family->name;
        cell.scenario = kind;
        cell.classifier = clf;
        cell.params = cv.model.spec().describe();
        cell.cv_accuracy = cv.model.cv_accuracy();
        if (bundle.val) cell.val_metrics = score(*bundle.val, mix_seed(boot_seed, 1));
        cell.test_metrics = score(bundle.test, boot_seed);

        const auto dir = eval_dir / std::string(to_string(kind));
        fs::create_directories(dir);
        const std::string clf_name(models::to_string(clf));
        {
          std::ofstream out(dir / ("cv_" + clf_name + ".csv"), std::ios::binary);
          cv.write_csv(out);
        }
        {
          std::ofstream out(dir / ("model_" + clf_name + ".txt"), std::ios::binary);
          cv.model.save(out);
        }

        RunManifest::Entry e;
        e.stage = "evaluate";
        e.family = family->name;
        e.seed = profile.seed;
        e.inputs = {bundle_dir / "train.csv", bundle_dir / "test.csv"};
        e.outputs = {dir / ("cv_" + clf_name + ".csv"), dir / ("model_" + clf_name + ".txt")};
        e.counts["scenario"] = std::string(to_string(kind));
        e.counts["classifier"] = clf_name;
        e.counts["params"] = cell.params;
        e.counts["cv_accuracy"] = cell.cv_accuracy;
        e.counts["test_accuracy"] = cell.test_metrics.accuracy;
        e.wall_seconds = seconds_since(t0);
        RunManifest(profile.out_dir).append(e, profile.snapshot);
        cells.push_back(std::move(cell));
      }
    }
    std::string lines;
    for (const auto& c : cells) lines += c.to_json().dump() + '\n';
    write_text(eval_dir / "cells.jsonl", lines);
    all_cells.insert(all_cells.end(), cells.begin(), cells.end());
  }
  return all_cells;
}

void cmd_report(const RunProfile& profile, const StageOptions& options) {
  for (const auto* family : select_families(profile, options)) {
    const auto t0 = Clock::now();
    const auto cells_path = profile.stage_dir(*family, "evaluate") / "cells.jsonl";
    require_file(cells_path, "evaluate");
    const auto files = emit_report(read_aggregate(cells_path.string()),
                                   profile.stage_dir(*family, "report").string());
    RunManifest::Entry e;
    e.stage = "report";
    e.family = family->name;
    e.inputs = {cells_path};
    for (const auto* group : {&files.tables, &files.confusions, &files.charts}) {
      for (const auto& f : *group) e.outputs.emplace_back(f);
    }
    e.outputs.emplace_back(files.aggregate);
    e.counts["tables"] = files.tables.size();
    e.counts["confusion_files"] = files.confusions.size();
    e.wall_seconds = seconds_since(t0);
    RunManifest(profile.out_dir).append(e, profile.snapshot);
  }
}

}  // namespace droidsynth
