// droidsynth command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data validation,
// 3 provider failure, 4 leakage abort.

#include <CLI11.hpp>

#include <iostream>

#include "droidsynth/error.hpp"
#include "droidsynth/pipeline.hpp"

namespace ds = droidsynth;

namespace {

struct Common {
  std::string profile_path;
  std::vector<std::string> families;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  ds::RunProfile load() const {
    auto profile = ds::RunProfile::load(profile_path);
    if (!out_dir.empty()) profile.out_dir = out_dir;
    if (seed) profile.seed = *seed;
    return profile;
  }
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-p,--profile", common.profile_path, "Run profile (JSON)")->required();
  cmd->add_option("-f,--family", common.families, "Family to process (repeatable; default all)");
  cmd->add_option("-o,--out", common.out_dir, "Override the profile's out_dir");
  cmd->add_option("-s,--seed", common.seed, "Override the profile's seed");
}

int run(int argc, char** argv) {
  CLI::App app{"Synthetic Android malware record generation and evaluation harness"};
  app.require_subcommand(1);

  Common common;
  bool mock = false;
  std::optional<std::size_t> count;
  std::vector<std::string> scenario_names, classifier_names;

  auto* prepare = app.add_subcommand("prepare", "Select families, drop/impute/filter columns");
  auto* corpus = app.add_subcommand("build-corpus", "Write the sanitized fine-tuning corpus");
  auto* finetune = app.add_subcommand("submit-finetune", "Upload the corpus and start a fine-tune job");
  auto* generate = app.add_subcommand("generate", "Generate candidate records (provider or --mock)");
  auto* validate = app.add_subcommand("validate", "Validate, repair and deduplicate records");
  auto* scenarios = app.add_subcommand("scenarios", "Build the train/val/test bundles");
  auto* evaluate = app.add_subcommand("evaluate", "Grid-search, fit and score the classifiers");
  auto* report = app.add_subcommand("report", "Write tables, confusion matrices and charts");
  for (auto* cmd : {prepare, corpus, finetune, generate, validate, scenarios, evaluate, report}) {
    add_common(cmd, common);
  }
  generate->add_flag("--mock", mock, "Use the offline generator; no network access");
  generate->add_option("-n,--count", count, "Records to generate (default: profile)");
  for (auto* cmd : {scenarios, evaluate}) {
    cmd->add_option("--scenario", scenario_names,
                    "real_only, real_plus_synth or synth_to_real (repeatable)");
  }
  evaluate->add_option("--classifier", classifier_names,
                       "knn, dtree, logreg, mlp or rforest (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto profile = common.load();
  ds::EvaluateOptions eval;
  eval.families = common.families;
  for (const auto& s : scenario_names) eval.scenarios.push_back(ds::scenario_from_string(s));
  for (const auto& c : classifier_names) eval.classifiers.push_back(ds::models::classifier_from_string(c));
  const ds::StageOptions stage{common.families};

  if (prepare->parsed()) {
    ds::cmd_prepare(profile, stage);
  } else if (corpus->parsed()) {
    ds::cmd_build_corpus(profile, stage);
  } else if (finetune->parsed()) {
    for (const auto& job : ds::cmd_submit_finetune(profile, stage)) std::cout << job << '\n';
  } else if (generate->parsed()) {
    ds::GenerateOptions opts;
    opts.families = common.families;
    opts.mock = mock;
    opts.count = count;
    ds::cmd_generate(profile, opts);
  } else if (validate->parsed()) {
    ds::cmd_validate(profile, stage);
  } else if (scenarios->parsed()) {
    ds::cmd_scenarios(profile, eval);
  } else if (evaluate->parsed()) {
    const auto cells = ds::cmd_evaluate(profile, eval);
    for (const auto& c : cells) {
      std::cout << c.family << '\t' << ds::to_string(c.scenario) << '\t'
                << ds::models::to_string(c.classifier) << "\taccuracy=" << c.test_metrics.accuracy
                << "\troc_auc=" << c.test_metrics.roc_auc << '\n';
    }
  } else if (report->parsed()) {
    ds::cmd_report(profile, stage);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ds::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ds::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const ds::ProviderError& e) {
    std::cerr << "provider error: " << e.what();
    if (!e.request_id().empty()) std::cerr << " (request id " << e.request_id() << ")";
    std::cerr << '\n';
    return 3;
  } catch (const ds::LeakageError& e) {
    std::cerr << "leakage: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
