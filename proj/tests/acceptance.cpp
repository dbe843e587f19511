// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance --tier 2   desk-scale property checks (criteria 5-12)
//   acceptance --tier 1   checks on the real-device dataset (criteria 1-4);
//                         needs DROIDSYNTH_KRONODROID_MALWARE and
//                         DROIDSYNTH_KRONODROID_BENIGN, exits 77 without them.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "droidsynth/error.hpp"
#include "droidsynth/log.hpp"
#include "droidsynth/metrics.hpp"
#include "droidsynth/models/decision_tree.hpp"
#include "droidsynth/models/knn.hpp"
#include "droidsynth/models/logistic_regression.hpp"
#include "droidsynth/models/mlp.hpp"
#include "droidsynth/models/random_forest.hpp"
#include "droidsynth/pipeline.hpp"
#include "droidsynth/rng.hpp"
#include "droidsynth/scenarios.hpp"
#include "droidsynth/synth_gen.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using namespace droidsynth;
using namespace droidsynth::models;

namespace {

// Pinned tolerances.
constexpr double kMetricTol = 1e-12;
constexpr double kAucTol = 1e-12;
constexpr double kCoverageMin = 0.90;
constexpr double kLogRegGradTol = 1e-5;
constexpr double kMlpGradTol = 1e-4;
constexpr double kBlobAccuracyMin = 0.95;
constexpr double kRfBankBotAccMin = 0.98;
constexpr double kRfBankBotAucMin = 0.99;
constexpr double kKnnLockerAccMin = 0.95;
constexpr double kAirpushAccMin = 0.96;
constexpr double kAugmentedDeltaMax = 0.03;
constexpr double kAugmentedFprMax = 0.04;

// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::ostringstream out;
    if (ok()) {
      out << count_ << " checks";
    } else {
      out << failed_ << "/" << count_ << " failed";
      for (const auto& f : failures_) out << "; " << f;
    }
    return out.str();
  }
  std::string note;

 private:
  std::size_t count_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
};

struct Criterion {
  int id;
  std::string name;
  std::function<void(Check&)> run;
};

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

FeatureMatrix random_matrix(std::size_t rows, int label, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(rows * 3);
  for (auto& x : v) x = rng.normal();
  return FeatureMatrix({"f0", "f1", "f2"}, std::move(v), std::vector<int>(rows, label));
}

std::vector<const Split*> splits_of(const SplitBundle& b) {
  std::vector<const Split*> out = {&b.train};
  if (b.val) out.push_back(&*b.val);
  out.push_back(&b.test);
  return out;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed << v;
  return out.str();
}

// ---- tier 2 ----------------------------------------------------------------

void metric_oracle(Check& c) {
  for (std::uint64_t tp = 0; tp <= 6; ++tp)
    for (std::uint64_t tn = 0; tn <= 6; ++tn)
      for (std::uint64_t fp = 0; fp <= 6; ++fp)
        for (std::uint64_t fn = 0; fn <= 6; ++fn) {
          if (tp + tn + fp + fn == 0) continue;
          const auto m = basic_metrics(ConfusionMatrix{tp, tn, fp, fn});
          const double acc = double(tp + tn) / double(tp + tn + fp + fn);
          const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
          const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
          const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
          const double fpr = fp + tn ? double(fp) / double(fp + tn) : 0.0;
          const std::string at = "(" + std::to_string(tp) + "," + std::to_string(tn) + "," +
                                 std::to_string(fp) + "," + std::to_string(fn) + ")";
          c.expect(close(m.accuracy, acc, kMetricTol), "accuracy " + at);
          c.expect(close(m.precision, p, kMetricTol), "precision " + at);
          c.expect(close(m.recall, r, kMetricTol), "recall " + at);
          c.expect(close(m.f1, f1, kMetricTol), "f1 " + at);
          c.expect(close(m.fpr, fpr, kMetricTol), "fpr " + at);
          c.expect(m.undefined.count("precision") == (tp + fp == 0), "precision flag " + at);
        }
  c.note = "2400 matrices, tol 1e-12";
}

double trapezoid_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::map<double, std::pair<int, int>, std::greater<>> by_score;
  int pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (labels[i] ? by_score[scores[i]].first : by_score[scores[i]].second)++;
    (labels[i] ? pos : neg)++;
  }
  double area = 0.0, tpr = 0.0, fpr = 0.0;
  for (const auto& [s, n] : by_score) {
    const double t2 = tpr + double(n.first) / pos, f2 = fpr + double(n.second) / neg;
    area += (f2 - fpr) * (tpr + t2) / 2.0;
    tpr = t2;
    fpr = f2;
  }
  return area;
}

void auc_equivalence(Check& c) {
  Rng rng(20240);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(200);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 3 == 0 ? double(rng.below(8)) : rng.unit();
      y[i] = int(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    const double auc = roc_auc(s, y);
    c.expect(close(auc, trapezoid_auc(s, y), kAucTol), "trial " + std::to_string(trial));
    if (trial % 3 != 0) {  // continuous scores: tie-free with probability 1
      std::vector<double> neg(n);
      std::transform(s.begin(), s.end(), neg.begin(), [](double v) { return -v; });
      c.expect(close(roc_auc(neg, y), 1.0 - auc, kAucTol), "antisymmetry " + std::to_string(trial));
    }
  }
  c.note = "500 score sets, tol 1e-12";
}

void bootstrap_ci_check(Check& c) {
  Rng rng(7);
  int covered = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<int> t(500), p(500);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = int(rng.below(2));
      p[i] = rng.unit() < 0.8 ? t[i] : 1 - t[i];
    }
    const auto ci = bootstrap_ci(t, p, 1000, std::uint64_t(trial));
    if (trial < 5) {
      const auto again = bootstrap_ci(t, p, 1000, std::uint64_t(trial));
      c.expect(ci.low == again.low && ci.high == again.high, "determinism");
    }
    const double acc = basic_metrics(confusion(t, p)).accuracy;
    c.expect(ci.low <= acc && acc <= ci.high, "ordering trial " + std::to_string(trial));
    if (ci.low <= 0.8 && 0.8 <= ci.high) ++covered;
  }
  const double coverage = double(covered) / trials;
  c.expect(coverage >= kCoverageMin, "coverage " + fmt(coverage));
  c.note = "coverage " + fmt(coverage) + " over 200 trials, n=500, B=1000";
}

void split_invariants(Check& c) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t real = 10 + rng.below(491), synth = 10 + rng.below(491);
    const std::size_t benign = 4 * std::max(real, synth) + rng.below(50);
    const auto r = random_matrix(real, 1, rng.next()), s = random_matrix(synth, 1, rng.next());
    const auto b = random_matrix(benign, 0, rng.next());
    ScenarioSpec spec;
    spec.seed = rng.next();
    std::vector<SplitBundle> bundles;
    spec.kind = ScenarioKind::real_only;
    bundles.push_back(build_scenario_real(r, b, spec));
    spec.kind = ScenarioKind::real_plus_synth;
    bundles.push_back(build_scenario_augmented(r, s, b, spec));
    spec.kind = ScenarioKind::synth_to_real;
    bundles.push_back(build_scenario_synth_to_real(s, r, b, spec));
    const std::string at = " trial " + std::to_string(trial);

    const auto& b1 = bundles[0];
    c.expect(b1.train.positives() == stratified_take(real, 0.8), "stratification" + at);
    c.expect(std::abs(double(b1.train.positives()) - 0.8 * double(real)) < 1.0, "stratification bound" + at);
    for (const auto& bundle : bundles) {
      std::set<std::pair<Provenance, std::size_t>> ids;
      for (const Split* sp : splits_of(bundle)) {
        c.expect(sp->positives() == sp->negatives(), "balance" + at);
        for (std::size_t i = 0; i < sp->provenance.size(); ++i) {
          c.expect(ids.insert({sp->provenance[i], sp->source_rows[i]}).second, "disjointness" + at);
        }
      }
    }
    const auto& b3 = bundles[2];
    const auto count = [](const Split& sp, Provenance p) {
      return std::count(sp.provenance.begin(), sp.provenance.end(), p);
    };
    c.expect(count(b3.train, Provenance::real_malware) == 0, "purity train" + at);
    c.expect(count(*b3.val, Provenance::synthetic_malware) == 0, "purity val" + at);
    c.expect(count(b3.test, Provenance::synthetic_malware) == 0, "purity test" + at);
    c.expect(b3.val->positives() == real / 2, "val floor" + at);
  }
  c.note = "100 randomized size draws in [10, 500]";
}

void leakage_detector(Check& c) {
  int detected = 0, false_reports = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.kind = kAllScenarios[seed % 3];
    const auto r = random_matrix(40 + seed, 1, seed), s = random_matrix(30, 1, seed + 1000);
    const auto b = random_matrix(400, 0, seed + 2000);
    SplitBundle bundle = spec.kind == ScenarioKind::real_only ? build_scenario_real(r, b, spec)
                         : spec.kind == ScenarioKind::real_plus_synth
                             ? build_scenario_augmented(r, s, b, spec)
                             : build_scenario_synth_to_real(s, r, b, spec);
    if (!check_leakage(bundle).clean()) ++false_reports;
    const std::vector<std::size_t> pick = {seed % bundle.test.matrix.rows()};
    bundle.train.matrix = FeatureMatrix::concat(bundle.train.matrix, bundle.test.matrix.select_rows(pick));
    bundle.train.provenance.push_back(bundle.test.provenance[pick[0]]);
    bundle.train.source_rows.push_back(bundle.test.source_rows[pick[0]]);
    const auto report = check_leakage(bundle);
    if (report.findings.size() == 1 && report.findings[0].row_b == pick[0]) ++detected;
  }
  c.expect(detected == 100, "detected " + std::to_string(detected) + "/100");
  c.expect(false_reports == 0, std::to_string(false_reports) + " false reports");
  c.note = "detected " + std::to_string(detected) + "/100, false reports " + std::to_string(false_reports) + "/100";
}

void validator_rules(Check& c) {
  testing::TempDir dir;
  const auto [mal, ben] = testing::write_dataset_fixture(dir.path());
  const auto rows = select_family(load_table(mal.string()), "BankBot");
  auto map = SanitizationMap::for_family("BankBot");
  const auto layout = RecordLayout::from_schema(rows.schema, map);
  const auto stats = compute_column_stats(rows);
  const auto base = mock_generate_record(layout, stats, 1, "FinTech").values;
  std::string int_key;
  for (const auto& k : layout.keys) {
    if (k != layout.label_key && layout.is_integer_key(k)) {
      int_key = k;
      break;
    }
  }
  auto with = [&](const std::function<void(ordered_json&)>& mutate) {
    auto v = base;
    mutate(v);
    return CandidateRecord::from_values(v);
  };
  const std::vector<std::pair<int, CandidateRecord>> cases = {
      {1, CandidateRecord::from_text("[1, 2]")},
      {2, with([](ordered_json& v) { v["SYS_401"] = 3; })},
      {3, with([&](ordered_json& v) { v[int_key] = 2.5; })},
      {4, with([&](ordered_json& v) { v[*layout.ratio_key] = 1.3; })},
      {5, with([&](ordered_json& v) { v[*layout.hash_key] = "ABC"; })},
      {6, with([&](ordered_json& v) { v[*layout.package_key] = "Not A Package"; })},
      {7, with([&](ordered_json& v) { v[layout.date_keys.front()] = "2020-01-31"; })},
      {8, with([&](ordered_json& v) { v[int_key] = nullptr; })},
      {9, with([&](ordered_json& v) { v.erase(layout.label_key); })},
  };
  for (const auto& [rule, candidate] : cases) {
    const auto r = validate_record(candidate, layout);
    std::set<int> rules;
    for (const auto& v : r.violations) rules.insert(v.rule);
    c.expect(rules == std::set<int>{rule}, "rule " + std::to_string(rule) + " not isolated");
    c.expect(r.verdict == (rule == 9 ? Verdict::repaired : Verdict::rejected),
             "rule " + std::to_string(rule) + " verdict");
    if (rule == 9) c.expect(r.record[layout.label_key] == 1, "AppType repaired to 1");
  }
  const auto a = CandidateRecord::from_values({{"x", 1}, {"sha256", "a"}});
  const auto a2 = CandidateRecord::from_values({{"x", 1}, {"sha256", "b"}});
  const auto b = CandidateRecord::from_values({{"x", 2}, {"sha256", "a"}});
  const auto d = dedup_records({a, a2, b});
  c.expect(d.removed_count == 1 && d.kept.size() == 2, "dedup [A,A',B]");
  c.note = "9 single-rule fixtures, repair path, masked-hash dedup";
}

template <typename LossFn>
double worst_gradient_error(std::vector<double> theta, const std::vector<double>& grad, LossFn loss) {
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double orig = theta[j];
    theta[j] = orig + h;
    const double up = loss(theta);
    theta[j] = orig - h;
    const double down = loss(theta);
    theta[j] = orig;
    worst = std::max(worst, relative_error(grad[j], (up - down) / (2 * h)));
  }
  return worst;
}

void classifier_sanity(Check& c) {
  std::ostringstream note;
  const auto blobs = testing::gaussian_blobs(1000, 10, 4.0, 2024);
  const auto parts = stratified_split(blobs.labels(), 0.8, 1);
  const auto train = blobs.select_rows(parts.part_a), test = blobs.select_rows(parts.part_b);
  for (auto kind : kAllClassifiers) {
    const auto model = fit_model(ClassifierSpec::defaults(kind, 3), train);
    const double acc = accuracy(test.labels(), model.predict(test));
    c.expect(acc >= kBlobAccuracyMin, std::string(to_string(kind)) + " accuracy " + fmt(acc));
    note << to_string(kind) << "=" << fmt(acc) << " ";
  }

  Rng rng(5);
  std::vector<double> x(12 * 4);
  for (auto& v : x) v = rng.normal();
  std::vector<int> y(12);
  for (auto& l : y) l = int(rng.below(2));
  std::vector<double> theta(5), grad;
  for (auto& t : theta) t = rng.normal();
  LogisticRegression::loss_and_gradient(MatrixView::of(x, 4), y, theta, 0.1, &grad);
  const double lr_err = worst_gradient_error(theta, grad, [&](const std::vector<double>& t) {
    return LogisticRegression::loss_and_gradient(MatrixView::of(x, 4), y, t, 0.1, nullptr);
  });
  c.expect(lr_err < kLogRegGradTol, "logreg gradient error " + std::to_string(lr_err));

  MlpParams mp;
  mp.hidden = {3};
  MlpClassifier net(mp, 17);
  net.initialize(4);
  auto w = net.parameters();
  for (auto& t : w) t = rng.normal();
  net.set_parameters(w);
  const std::vector<double> x8(x.begin(), x.begin() + 8 * 4);
  const std::vector<int> y8(y.begin(), y.begin() + 8);
  net.loss_and_gradient(MatrixView::of(x8, 4), y8, &grad);
  const double mlp_err = worst_gradient_error(w, grad, [&](const std::vector<double>& t) {
    net.set_parameters(t);
    return net.loss_and_gradient(MatrixView::of(x8, 4), y8, nullptr);
  });
  c.expect(mlp_err < kMlpGradTol, "mlp gradient error " + std::to_string(mlp_err));

  // kNN against an exhaustive sort on integer-valued points (many ties).
  std::vector<double> grid(200 * 3);
  for (auto& v : grid) v = double(rng.below(5));
  const FeatureMatrix pts({"a", "b", "c"}, grid, std::vector<int>(200, 0));
  KnnClassifier knn(KnnParams{7});
  knn.fit(MatrixView::of(pts), pts.labels());
  for (int q = 0; q < 50; ++q) {
    const std::vector<double> query = {double(rng.below(5)), double(rng.below(5)), double(rng.below(5))};
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t r = 0; r < pts.rows(); ++r) {
      double d = 0.0;
      for (std::size_t k = 0; k < 3; ++k) d += (pts.at(r, k) - query[k]) * (pts.at(r, k) - query[k]);
      all.push_back({d, r});
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected;
    for (int i = 0; i < 7; ++i) expected.push_back(all[std::size_t(i)].second);
    c.expect(knn.neighbors(query) == expected, "knn neighbours query " + std::to_string(q));
  }

  const auto small = testing::gaussian_blobs(150, 4, 1.0, 3);
  ForestParams fp;
  fp.n_trees = 1;
  fp.bootstrap = false;
  fp.max_features = 4;
  RandomForest forest(fp, 1);
  forest.fit(MatrixView::of(small), small.labels());
  DecisionTreeClassifier tree;
  tree.fit(MatrixView::of(small), small.labels());
  c.expect(forest.predict_proba(MatrixView::of(small)) == tree.predict_proba(MatrixView::of(small)),
           "one-tree forest differs from the tree");
  note << "| grad err logreg " << std::scientific << lr_err << " mlp " << mlp_err;
  c.note = note.str();
}

std::map<std::string, std::string> snapshot_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.jsonl") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    out[e.path().lexically_relative(root).generic_string()] = buf.str();
  }
  return out;
}

void end_to_end(Check& c) {
  testing::TempDir dir;
  testing::write_dataset_fixture(dir.path());
  std::vector<std::map<std::string, std::string>> runs;
  std::size_t cells = 0;
  for (const char* out : {"run_a", "run_b"}) {
    nlohmann::json j = {
        {"out_dir", (dir.path() / out).string()},
        {"malware_csv", (dir.path() / "malware.csv").string()},
        {"benign_csv", (dir.path() / "benign.csv").string()},
        {"seed", 3},
        {"bootstrap_resamples", 200},
        {"families", {{{"name", "BankBot"}, {"finetune_samples", 20}, {"generate_count", 100}}}},
        {"grids",
         {{"knn", {"k=3", "k=5"}},
          {"dtree", {"max_depth=8;min_leaf=1", "max_depth=none;min_leaf=1"}},
          {"logreg", {"l2=0.1"}},
          {"mlp", {"hidden=16;epochs=20;batch=16"}},
          {"rforest", {"n_trees=20;max_depth=none"}}}},
    };
    const auto profile = RunProfile::from_json(j, dir.path());
    cmd_prepare(profile);
    cmd_build_corpus(profile);
    GenerateOptions gen;
    gen.mock = true;
    cmd_generate(profile, gen);
    cmd_validate(profile);
    const auto manifest = RunManifest(profile.out_dir).read();
    for (const auto& e : manifest) {
      if (e.value("stage", "") != "validate") continue;
      const auto& counts = e["counts"];
      c.expect(counts.value("candidates", 0) == 100, "100 candidates");
      c.expect(counts.value("rejected", -1) == 0, "validation rejected records");
      c.expect(counts.value("accepted", 0) + counts.value("repaired", 0) == 100, "100% accepted");
    }
    cmd_scenarios(profile);
    cells = cmd_evaluate(profile).size();
    cmd_report(profile);
    c.expect(cells == 15, "evaluate produced " + std::to_string(cells) + " cells");
    c.expect(RunManifest(profile.out_dir).verify().empty(), "manifest digests");
    runs.push_back(snapshot_files(profile.out_dir));
  }
  c.expect(runs[0] == runs[1], "outputs differ between the two runs");
  c.note = std::to_string(runs[0].size()) + " files byte-identical across 2 runs, " + std::to_string(cells) + " cells";
}

// ---- tier 1 ----------------------------------------------------------------

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

struct Tier1Context {
  fs::path work;
  RunProfile profile;
};

RunProfile tier1_profile(const fs::path& work, const std::string& malware, const std::string& benign) {
  nlohmann::json j = {
      {"out_dir", (work / "out").string()},
      {"malware_csv", malware},
      {"benign_csv", benign},
      {"seed", 1},
      {"drop_duplicate_rows", true},
      {"families",
       {{{"name", "BankBot"}, {"generate_count", 392}},
        {{"name", "Locker/SLocker"}},
        {{"name", "Airpush/StopSMS"}}}},
  };
  return RunProfile::from_json(j, work);
}

const ReportCell* find_cell(const std::vector<ReportCell>& cells, ScenarioKind s, ClassifierKind k) {
  for (const auto& c : cells)
    if (c.scenario == s && c.classifier == k) return &c;
  return nullptr;
}

void preparation_counts(Check& c, const Tier1Context& ctx) {
  for (const auto& fam : ctx.profile.families) {
    const auto kv = read_key_values(ctx.profile.stage_dir(fam, "prepare") / "prepare.txt");
    const auto num = [&](const std::string& k) { return kv.count(k) ? std::stoul(kv.at(k)) : 0UL; };
    c.expect(num("columns_after_exclusion") == kPublishedColumnsAfterExclusion,
             fam.name + " after exclusion " + std::to_string(num("columns_after_exclusion")));
    c.expect(num("columns_after_filter") == kPublishedColumnsAfterFilter,
             fam.name + " after filter " + std::to_string(num("columns_after_filter")));
    c.expect(num("columns_dropped") == 87, fam.name + " dropped " + std::to_string(num("columns_dropped")));
    std::size_t total = 0;
    for (const auto& [k, v] : kv)
      if (k.starts_with("category.")) total += std::stoul(v);
    c.expect(total == num("columns_after_filter"), fam.name + " category totals " + std::to_string(total));
  }
}

void family_rows(Check& c, const Tier1Context& ctx) {
  const std::map<std::string, std::size_t> expected = {
      {"BankBot", 1297}, {"Locker/SLocker", 1846}, {"Airpush/StopSMS", 7775}};
  for (const auto& fam : ctx.profile.families) {
    const auto kv = read_key_values(ctx.profile.stage_dir(fam, "prepare") / "prepare.txt");
    const auto rows = kv.count("malware_rows") ? std::stoul(kv.at("malware_rows")) : 0UL;
    c.expect(rows == expected.at(fam.name), fam.name + " rows " + std::to_string(rows));
  }
}

void real_only_band(Check& c, const Tier1Context& ctx) {
  std::ostringstream note;
  EvaluateOptions bank;
  bank.families = {"BankBot"};
  bank.scenarios = {ScenarioKind::real_only};
  bank.classifiers = {ClassifierKind::rforest};
  const auto b = cmd_evaluate(ctx.profile, bank);
  if (const auto* cell = find_cell(b, ScenarioKind::real_only, ClassifierKind::rforest)) {
    c.expect(cell->test_metrics.accuracy >= kRfBankBotAccMin, "RF BankBot accuracy " + fmt(cell->test_metrics.accuracy));
    c.expect(cell->test_metrics.roc_auc >= kRfBankBotAucMin, "RF BankBot AUC " + fmt(cell->test_metrics.roc_auc));
    note << "RF/BankBot acc " << fmt(cell->test_metrics.accuracy) << " auc " << fmt(cell->test_metrics.roc_auc) << "; ";
  } else {
    c.expect(false, "no RF BankBot cell");
  }
  EvaluateOptions locker = bank;
  locker.families = {"Locker/SLocker"};
  locker.classifiers = {ClassifierKind::knn};
  const auto l = cmd_evaluate(ctx.profile, locker);
  if (const auto* cell = find_cell(l, ScenarioKind::real_only, ClassifierKind::knn)) {
    c.expect(cell->test_metrics.accuracy >= kKnnLockerAccMin, "kNN Locker accuracy " + fmt(cell->test_metrics.accuracy));
    note << "kNN/Locker acc " << fmt(cell->test_metrics.accuracy) << "; ";
  } else {
    c.expect(false, "no kNN Locker cell");
  }
  EvaluateOptions airpush = bank;
  airpush.families = {"Airpush/StopSMS"};
  airpush.classifiers.assign(std::begin(kAllClassifiers), std::end(kAllClassifiers));
  const auto a = cmd_evaluate(ctx.profile, airpush);
  for (auto kind : kAllClassifiers) {
    const auto* cell = find_cell(a, ScenarioKind::real_only, kind);
    const double acc = cell ? cell->test_metrics.accuracy : 0.0;
    c.expect(acc >= kAirpushAccMin, std::string(to_string(kind)) + " Airpush accuracy " + fmt(acc));
    note << to_string(kind) << "/Airpush " << fmt(acc) << " ";
  }
  c.note = note.str();
}

void augmented_non_degradation(Check& c, const Tier1Context& ctx) {
  StageOptions bank{{"BankBot"}};
  cmd_build_corpus(ctx.profile, bank);
  GenerateOptions gen;
  gen.families = bank.families;
  gen.mock = true;
  cmd_generate(ctx.profile, gen);
  cmd_validate(ctx.profile, bank);
  EvaluateOptions eval;
  eval.families = bank.families;
  eval.scenarios = {ScenarioKind::real_only, ScenarioKind::real_plus_synth};
  eval.classifiers = {ClassifierKind::rforest};
  cmd_scenarios(ctx.profile, eval);
  const auto cells = cmd_evaluate(ctx.profile, eval);
  const auto* real = find_cell(cells, ScenarioKind::real_only, ClassifierKind::rforest);
  const auto* aug = find_cell(cells, ScenarioKind::real_plus_synth, ClassifierKind::rforest);
  if (!real || !aug) {
    c.expect(false, "missing RF BankBot cells");
    return;
  }
  const double delta = std::abs(aug->test_metrics.accuracy - real->test_metrics.accuracy);
  c.expect(delta <= kAugmentedDeltaMax, "accuracy delta " + fmt(delta));
  c.expect(aug->test_metrics.fpr <= kAugmentedFprMax, "augmented FPR " + fmt(aug->test_metrics.fpr));
  c.note = "real " + fmt(real->test_metrics.accuracy) + " augmented " + fmt(aug->test_metrics.accuracy) +
           " fpr " + fmt(aug->test_metrics.fpr);
}

int run(const std::vector<Criterion>& criteria) {
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (c.ok() ? "PASS" : "FAIL") << "  " << cr.id << "  " << cr.name << "  [" << c.summary();
    if (!c.note.empty()) std::cout << "; " << c.note;
    std::cout << "; " << fmt(secs) << " s]" << std::endl;
    failed += !c.ok();
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"droidsynth acceptance suite"};
  int tier = 2;
  app.add_option("--tier", tier, "1: real-device dataset, 2: desk-scale properties")
      ->check(CLI::IsMember({1, 2}));
  CLI11_PARSE(app, argc, argv);

  if (tier == 2) {
    // The fixtures are far smaller than the published tables; drift warnings are expected.
    log::ScopedSink quiet([](std::string_view) {});
    return run({
        {5, "metric oracle equivalence", metric_oracle},
        {6, "AUC pair statistic vs trapezoid", auc_equivalence},
        {7, "bootstrap CI determinism, coverage, ordering", bootstrap_ci_check},
        {8, "split invariants", split_invariants},
        {9, "leakage detector", leakage_detector},
        {10, "validator rule isolation and dedup", validator_rules},
        {11, "classifier sanity", classifier_sanity},
        {12, "end-to-end mock run", end_to_end},
    });
  }

  const char* malware = std::getenv("DROIDSYNTH_KRONODROID_MALWARE");
  const char* benign = std::getenv("DROIDSYNTH_KRONODROID_BENIGN");
  if (!malware || !benign || !fs::exists(malware) || !fs::exists(benign)) {
    for (const char* line : {"1  preparation counts", "2  family row counts", "3  real-only reproduction band",
                             "4  scenario-2 non-degradation"}) {
      std::cout << "SKIP  " << line
                << "  [set DROIDSYNTH_KRONODROID_MALWARE and DROIDSYNTH_KRONODROID_BENIGN]" << std::endl;
    }
    return 77;
  }
  testing::TempDir work;
  Tier1Context ctx{work.path(), tier1_profile(work.path(), malware, benign)};
  cmd_prepare(ctx.profile);
  return run({
      {1, "preparation counts", [&](Check& c) { preparation_counts(c, ctx); }},
      {2, "family row counts", [&](Check& c) { family_rows(c, ctx); }},
      {3, "real-only reproduction band", [&](Check& c) {
         cmd_scenarios(ctx.profile, EvaluateOptions{{}, {ScenarioKind::real_only}, {}});
         real_only_band(c, ctx);
       }},
      {4, "scenario-2 non-degradation", [&](Check& c) { augmented_non_degradation(c, ctx); }},
  });
}
