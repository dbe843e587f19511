#include "droidsynth/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "droidsynth/csv.hpp"
#include "droidsynth/error.hpp"
#include "droidsynth/rng.hpp"

namespace droidsynth {
namespace {

enum SeedStream : std::uint64_t {
  kBenignDraw = 1,
  kSplit = 2,
  kBenignSlices = 3,
  kRealHalves = 4,
};

std::uint64_t benign_seed(const ScenarioSpec& spec) {
  return spec.benign_seed ? *spec.benign_seed : mix_seed(spec.seed, kBenignDraw);
}

// A labeled pool of rows plus where each row came from.
struct Pool {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<Provenance> provenance;
  std::vector<std::size_t> source_rows;

  void append(const FeatureMatrix& m, std::span<const std::size_t> rows, int label,
              Provenance p) {
    if (names.empty()) names = m.feature_names();
    for (std::size_t r : rows) {
      auto row = m.row(r);
      values.insert(values.end(), row.begin(), row.end());
      labels.push_back(label);
      provenance.push_back(p);
      source_rows.push_back(r);
    }
  }

  Split take(std::span<const std::size_t> rows) const {
    const std::size_t cols = names.size();
    Split s;
    std::vector<double> v;
    std::vector<int> l;
    v.reserve(rows.size() * cols);
    for (std::size_t r : rows) {
      v.insert(v.end(), values.begin() + static_cast<std::ptrdiff_t>(r * cols),
               values.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
      l.push_back(labels[r]);
      s.provenance.push_back(provenance[r]);
      s.source_rows.push_back(source_rows[r]);
    }
    s.matrix = FeatureMatrix(names, std::move(v), std::move(l));
    return s;
  }

  std::size_t size() const { return labels.size(); }
};

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

void require_same_columns(const FeatureMatrix& reference, const FeatureMatrix& other,
                          std::string_view what) {
  if (reference.feature_names() == other.feature_names()) return;
  std::unordered_set<std::string> ref(reference.feature_names().begin(),
                                      reference.feature_names().end());
  std::unordered_set<std::string> got(other.feature_names().begin(), other.feature_names().end());
  std::string msg = std::string(what) + ": column misalignment;";
  for (const auto& n : reference.feature_names())
    if (!got.count(n)) msg += " missing " + n;
  for (const auto& n : other.feature_names())
    if (!ref.count(n)) msg += " extra " + n;
  if (msg.back() == ';') msg += " columns are out of order";
  throw DataError(msg);
}

// Rows of `m` whose canonical encoding has not been seen yet.
std::vector<std::size_t> unique_rows(const FeatureMatrix& m, std::unordered_set<std::string>& seen) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (seen.insert(canonical_row_bytes(m.row(r))).second) keep.push_back(r);
  }
  return keep;
}

struct Sources {
  std::vector<std::size_t> real;
  std::vector<std::size_t> synth;
  std::vector<std::size_t> benign;
};

Sources source_rows(const FeatureMatrix* real, const FeatureMatrix* synth,
                    const FeatureMatrix& benign, bool dedup) {
  Sources s;
  if (!dedup) {
    if (real) s.real = all_rows(real->rows());
    if (synth) s.synth = all_rows(synth->rows());
    s.benign = all_rows(benign.rows());
    return s;
  }
  std::unordered_set<std::string> seen;
  if (real) s.real = unique_rows(*real, seen);
  if (synth) s.synth = unique_rows(*synth, seen);
  s.benign = unique_rows(benign, seen);
  return s;
}

// Picks n of the candidate rows with a nested seeded draw.
std::vector<std::size_t> draw(std::span<const std::size_t> candidates, std::size_t n,
                              std::uint64_t seed) {
  auto picks = sample_without_replacement(candidates.size(), n, seed);
  std::vector<std::size_t> out;
  out.reserve(picks.size());
  for (std::size_t p : picks) out.push_back(candidates[p]);
  return out;
}

SplitBundle split_balanced(const Pool& pool, const ScenarioSpec& spec) {
  auto parts = stratified_split(pool.labels, spec.train_fraction, mix_seed(spec.seed, kSplit));
  return SplitBundle{spec, pool.take(parts.part_a), std::nullopt, pool.take(parts.part_b)};
}

void write_split(const Split& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  csv::Record header = split.matrix.feature_names();
  header.insert(header.end(), {"label", "provenance", "source_row"});
  csv::write_record(out, header);
  for (std::size_t r = 0; r < split.matrix.rows(); ++r) {
    csv::Record rec;
    rec.reserve(header.size());
    for (double v : split.matrix.row(r)) rec.push_back(csv::format_number(v));
    rec.push_back(std::to_string(split.matrix.labels()[r]));
    rec.emplace_back(to_string(split.provenance[r]));
    rec.push_back(std::to_string(split.source_rows[r]));
    csv::write_record(out, rec);
  }
}

Split read_split(const std::string& path) {
  auto records = csv::read_file(path);
  if (records.empty() || records.front().size() < 3) throw DataError(path + ": missing header");
  const auto& header = records.front();
  const std::size_t n_feat = header.size() - 3;
  if (header[n_feat] != "label" || header[n_feat + 1] != "provenance" ||
      header[n_feat + 2] != "source_row") {
    throw DataError(path + ": expected trailing label,provenance,source_row columns");
  }
  Split s;
  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw DataError(path + ": row " + std::to_string(r - 1) + " has wrong width");
    }
    for (std::size_t c = 0; c < n_feat; ++c) {
      auto v = parse_finite(rec[c]);
      if (!v) throw DataError(path + ": row " + std::to_string(r - 1) + ", column '" +
                              header[c] + "': not a number");
      values.push_back(*v);
    }
    auto label = parse_finite(rec[n_feat]);
    auto src = parse_finite(rec[n_feat + 2]);
    if (!label || !src) throw DataError(path + ": malformed label or source_row");
    labels.push_back(static_cast<int>(*label));
    s.provenance.push_back(provenance_from_string(rec[n_feat + 1]));
    s.source_rows.push_back(static_cast<std::size_t>(*src));
  }
  s.matrix = FeatureMatrix({header.begin(), header.begin() + static_cast<std::ptrdiff_t>(n_feat)},
                           std::move(values), std::move(labels));
  return s;
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::real_only: return "real_only";
    case ScenarioKind::real_plus_synth: return "real_plus_synth";
    case ScenarioKind::synth_to_real: return "synth_to_real";
  }
  return "real_only";
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::real_malware: return "real_malware";
    case Provenance::synthetic_malware: return "synthetic_malware";
    case Provenance::benign: return "benign";
  }
  return "benign";
}

ScenarioKind scenario_from_string(std::string_view text) {
  for (auto k : kAllScenarios)
    if (to_string(k) == text) return k;
  throw UsageError("unknown scenario '" + std::string(text) + "'");
}

Provenance provenance_from_string(std::string_view text) {
  for (auto p : {Provenance::real_malware, Provenance::synthetic_malware, Provenance::benign})
    if (to_string(p) == text) return p;
  throw DataError("unknown provenance '" + std::string(text) + "'");
}

void ScenarioSpec::check() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("scenario: train_fraction must lie in (0, 1)");
  }
}

std::size_t Split::positives() const {
  return static_cast<std::size_t>(
      std::count(matrix.labels().begin(), matrix.labels().end(), 1));
}

std::size_t Split::negatives() const { return matrix.rows() - positives(); }

std::size_t stratified_take(std::size_t class_rows, double fraction) {
  const long double x = static_cast<long double>(fraction) * class_rows;
  const long double fl = std::floor(x + 1e-9L);
  std::size_t take = static_cast<std::size_t>(fl);
  if (std::fabs(x - fl - 0.5L) < 1e-9L) ++take;
  return std::min(take, class_rows);
}

StratifiedIndices stratified_split(std::span<const int> labels, double fraction,
                                   std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw UsageError("stratified_split: fraction must lie in (0, 1)");
  }
  StratifiedIndices out;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) rows.push_back(i);
    if (rows.size() < 2) {
      throw DataError("stratified_split: class " + std::to_string(cls) + " has " +
                      std::to_string(rows.size()) + " rows, need at least 2");
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(rows);
    const std::size_t take = stratified_take(rows.size(), fraction);
    out.part_a.insert(out.part_a.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    out.part_b.insert(out.part_b.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  std::sort(out.part_a.begin(), out.part_a.end());
  std::sort(out.part_b.begin(), out.part_b.end());
  return out;
}

SplitBundle build_scenario_real(const FeatureMatrix& real_mal, const FeatureMatrix& benign_pool,
                                const ScenarioSpec& spec) {
  spec.check();
  require_same_columns(real_mal, benign_pool, "build_scenario_real");
  const Sources src = source_rows(&real_mal, nullptr, benign_pool, spec.drop_duplicate_rows);
  if (src.benign.size() < src.real.size()) {
    throw DataError("build_scenario_real: " + std::to_string(src.benign.size()) +
                    " benign rows cannot balance " + std::to_string(src.real.size()) +
                    " malware rows");
  }
  Pool pool;
  pool.append(real_mal, src.real, 1, Provenance::real_malware);
  pool.append(benign_pool, draw(src.benign, src.real.size(), benign_seed(spec)), 0,
              Provenance::benign);
  SplitBundle b = split_balanced(pool, spec);
  b.spec.kind = ScenarioKind::real_only;
  return b;
}

SplitBundle build_scenario_augmented(const FeatureMatrix& real_mal, const FeatureMatrix& synth_mal,
                                     const FeatureMatrix& benign_pool, const ScenarioSpec& spec) {
  spec.check();
  require_same_columns(real_mal, benign_pool, "build_scenario_augmented");
  if (synth_mal.rows() > 0 || synth_mal.cols() > 0) {
    require_same_columns(real_mal, synth_mal, "build_scenario_augmented (synthetic)");
  }
  const bool has_synth = synth_mal.rows() > 0;
  const Sources src = source_rows(&real_mal, has_synth ? &synth_mal : nullptr, benign_pool,
                                  spec.drop_duplicate_rows);
  const std::size_t malware = src.real.size() + src.synth.size();
  if (src.benign.size() < malware) {
    throw DataError("build_scenario_augmented: " + std::to_string(src.benign.size()) +
                    " benign rows cannot balance " + std::to_string(malware) + " malware rows");
  }
  Pool pool;
  pool.append(real_mal, src.real, 1, Provenance::real_malware);
  if (has_synth) pool.append(synth_mal, src.synth, 1, Provenance::synthetic_malware);
  pool.append(benign_pool, draw(src.benign, malware, benign_seed(spec)), 0, Provenance::benign);
  SplitBundle b = split_balanced(pool, spec);
  b.spec.kind = ScenarioKind::real_plus_synth;
  return b;
}

SplitBundle build_scenario_synth_to_real(const FeatureMatrix& synth_mal,
                                         const FeatureMatrix& real_mal,
                                         const FeatureMatrix& benign_pool,
                                         const ScenarioSpec& spec) {
  spec.check();
  require_same_columns(real_mal, benign_pool, "build_scenario_synth_to_real");
  require_same_columns(real_mal, synth_mal, "build_scenario_synth_to_real (synthetic)");
  const Sources src = source_rows(&real_mal, &synth_mal, benign_pool, spec.drop_duplicate_rows);

  // Real malware halves: validation gets the floor, test the remainder.
  std::vector<std::size_t> real = src.real;
  Rng(mix_seed(spec.seed, kRealHalves)).shuffle(real);
  const std::size_t n_val = real.size() / 2;
  std::vector<std::size_t> real_val(real.begin(), real.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> real_test(real.begin() + static_cast<std::ptrdiff_t>(n_val), real.end());
  std::sort(real_val.begin(), real_val.end());
  std::sort(real_test.begin(), real_test.end());

  // Benign pool sliced 40/30/30 before undersampling.
  std::vector<std::size_t> benign = src.benign;
  const std::uint64_t slice_seed =
      spec.benign_seed ? *spec.benign_seed : mix_seed(spec.seed, kBenignSlices);
  Rng(slice_seed).shuffle(benign);
  const std::size_t n_train_slice = static_cast<std::size_t>(std::floor(0.4L * benign.size() + 1e-9L));
  const std::size_t n_val_slice = static_cast<std::size_t>(std::floor(0.3L * benign.size() + 1e-9L));
  auto slice = [&](std::size_t from, std::size_t to) {
    std::vector<std::size_t> s(benign.begin() + static_cast<std::ptrdiff_t>(from),
                               benign.begin() + static_cast<std::ptrdiff_t>(to));
    std::sort(s.begin(), s.end());
    return s;
  };
  const auto benign_train = slice(0, n_train_slice);
  const auto benign_val = slice(n_train_slice, n_train_slice + n_val_slice);
  const auto benign_test = slice(n_train_slice + n_val_slice, benign.size());

  auto need = [](const std::vector<std::size_t>& slice_rows, std::size_t n, const char* which) {
    if (slice_rows.size() < n) {
      throw DataError(std::string("build_scenario_synth_to_real: benign ") + which + " slice has " +
                      std::to_string(slice_rows.size()) + " rows, need " + std::to_string(n));
    }
  };
  need(benign_train, src.synth.size(), "train");
  need(benign_val, real_val.size(), "validation");
  need(benign_test, real_test.size(), "test");

  const std::uint64_t draw_seed = benign_seed(spec);
  auto make = [&](const FeatureMatrix& mal, const std::vector<std::size_t>& mal_rows,
                  Provenance p, const std::vector<std::size_t>& benign_slice,
                  std::uint64_t stream) {
    Pool pool;
    pool.append(mal, mal_rows, 1, p);
    pool.append(benign_pool, draw(benign_slice, mal_rows.size(), mix_seed(draw_seed, stream)), 0,
                Provenance::benign);
    return pool.take(all_rows(pool.size()));
  };

  SplitBundle b;
  b.spec = spec;
  b.spec.kind = ScenarioKind::synth_to_real;
  b.train = make(synth_mal, src.synth, Provenance::synthetic_malware, benign_train, 10);
  b.val = make(real_mal, real_val, Provenance::real_malware, benign_val, 11);
  b.test = make(real_mal, real_test, Provenance::real_malware, benign_test, 12);
  return b;
}

// ---- hashing -------------------------------------------------------------

std::string canonical_row_bytes(std::span<const double> row) {
  std::string out;
  out.reserve(row.size() * 8);
  auto put_le = [&out](std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  };
  for (double x : row) {
    const double scaled = std::round(x * 1e9);
    if (std::fabs(scaled) < 9.0e18) {
      put_le(static_cast<std::uint64_t>(static_cast<std::int64_t>(scaled)));
    } else {
      out.push_back(static_cast<char>(0xff));
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      put_le(bits);
    }
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t row_hash(std::span<const double> row) { return fnv1a64(canonical_row_bytes(row)); }

std::vector<std::uint64_t> row_hashes(const FeatureMatrix& matrix, const RowHasher& hasher) {
  std::vector<std::uint64_t> out;
  out.reserve(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) out.push_back(hasher(matrix.row(r)));
  return out;
}

std::string LeakageReport::describe() const {
  if (clean()) return "clean";
  std::ostringstream out;
  out << findings.size() << " leaked row(s):";
  for (const auto& f : findings) {
    out << ' ' << f.split_a << '[' << f.row_a << "]=" << f.split_b << '[' << f.row_b << ']';
  }
  return out.str();
}

LeakageReport check_leakage(const SplitBundle& bundle, const RowHasher& hasher) {
  LeakageReport report;
  struct Named {
    const char* name;
    const Split* split;
  };
  std::vector<Named> splits = {{"train", &bundle.train}};
  if (bundle.val) splits.push_back({"val", &*bundle.val});
  splits.push_back({"test", &bundle.test});

  std::vector<std::vector<std::uint64_t>> hashes;
  for (const auto& s : splits) hashes.push_back(row_hashes(s.split->matrix, hasher));

  for (std::size_t a = 0; a < splits.size(); ++a) {
    std::unordered_multimap<std::uint64_t, std::size_t> index;
    for (std::size_t r = 0; r < hashes[a].size(); ++r) index.emplace(hashes[a][r], r);
    for (std::size_t b = a + 1; b < splits.size(); ++b) {
      for (std::size_t r = 0; r < hashes[b].size(); ++r) {
        auto [lo, hi] = index.equal_range(hashes[b][r]);
        for (auto it = lo; it != hi; ++it) {
          const auto bytes_a = canonical_row_bytes(splits[a].split->matrix.row(it->second));
          const auto bytes_b = canonical_row_bytes(splits[b].split->matrix.row(r));
          if (bytes_a == bytes_b) {
            report.findings.push_back(
                {splits[a].name, it->second, splits[b].name, r, hashes[b][r]});
          } else {
            ++report.hash_collisions;
          }
        }
      }
    }
  }
  return report;
}

// ---- persistence ---------------------------------------------------------

void write_bundle(const SplitBundle& bundle, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_split(bundle.train, dir + "/train.csv");
  if (bundle.val) write_split(*bundle.val, dir + "/val.csv");
  write_split(bundle.test, dir + "/test.csv");

  std::ofstream m(dir + "/manifest.txt", std::ios::binary);
  if (!m) throw DataError("cannot write " + dir + "/manifest.txt");
  m << "scenario=" << to_string(bundle.spec.kind) << '\n';
  m << "family=" << bundle.spec.family << '\n';
  m << "seed=" << bundle.spec.seed << '\n';
  m << "train_fraction=" << csv::format_number(bundle.spec.train_fraction) << '\n';
  m << "benign_seed=" << (bundle.spec.benign_seed ? std::to_string(*bundle.spec.benign_seed) : "")
    << '\n';
  m << "drop_duplicate_rows=" << (bundle.spec.drop_duplicate_rows ? "true" : "false") << '\n';
  m << "hash_algorithm=" << kRowHashAlgorithm << '\n';
  m << "features=" << bundle.train.matrix.cols() << '\n';
  auto counts = [&](const char* name, const Split& s) {
    std::map<std::string_view, std::size_t> hist;
    for (auto p : s.provenance) ++hist[to_string(p)];
    m << name << ".rows=" << s.matrix.rows() << '\n';
    m << name << ".positives=" << s.positives() << '\n';
    m << name << ".negatives=" << s.negatives() << '\n';
    for (const auto& [p, n] : hist) m << name << ".provenance." << p << '=' << n << '\n';
  };
  counts("train", bundle.train);
  if (bundle.val) counts("val", *bundle.val);
  counts("test", bundle.test);
}

SplitBundle read_bundle(const std::string& dir) {
  std::ifstream m(dir + "/manifest.txt");
  if (!m) throw DataError("no scenario bundle at " + dir);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(m, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  SplitBundle b;
  b.spec.kind = scenario_from_string(kv["scenario"]);
  b.spec.family = kv["family"];
  b.spec.seed = std::stoull(kv.count("seed") ? kv["seed"] : "0");
  if (auto f = parse_finite(kv["train_fraction"])) b.spec.train_fraction = *f;
  if (!kv["benign_seed"].empty()) b.spec.benign_seed = std::stoull(kv["benign_seed"]);
  b.spec.drop_duplicate_rows = kv["drop_duplicate_rows"] == "true";
  b.train = read_split(dir + "/train.csv");
  if (std::filesystem::exists(dir + "/val.csv")) b.val = read_split(dir + "/val.csv");
  b.test = read_split(dir + "/test.csv");
  return b;
}

void write_matrix_csv(const FeatureMatrix& matrix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  csv::write_record(out, matrix.feature_names());
  csv::Record rec;
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    rec.clear();
    for (double v : matrix.row(r)) rec.push_back(csv::format_number(v));
    csv::write_record(out, rec);
  }
}

FeatureMatrix read_matrix_csv(const std::string& path, int label) {
  auto records = csv::read_file(path);
  if (records.empty()) throw DataError(path + ": missing header");
  const auto& header = records.front();
  std::vector<double> values;
  values.reserve((records.size() - 1) * header.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw DataError(path + ": row " + std::to_string(r - 1) + " has wrong width");
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
      auto v = parse_finite(records[r][c]);
      if (!v) throw DataError(path + ": row " + std::to_string(r - 1) + ", column '" + header[c] +
                              "': not a number");
      values.push_back(*v);
    }
  }
  return FeatureMatrix(header, std::move(values), std::vector<int>(records.size() - 1, label));
}

}  // namespace droidsynth
