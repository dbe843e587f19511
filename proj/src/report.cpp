#include "droidsynth/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "droidsynth/csv.hpp"
#include "droidsynth/error.hpp"

namespace droidsynth {
namespace fs = std::filesystem;

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::size_t classifier_rank(models::ClassifierKind k) {
  return static_cast<std::size_t>(std::find(std::begin(models::kAllClassifiers),
                                            std::end(models::kAllClassifiers), k) -
                                  std::begin(models::kAllClassifiers));
}

std::size_t scenario_rank(ScenarioKind k) {
  return static_cast<std::size_t>(std::find(std::begin(kAllScenarios), std::end(kAllScenarios), k) -
                                  std::begin(kAllScenarios));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string table_value(const MetricSet& m, std::string_view row) {
  auto flagged = [&](double v, const char* name) {
    return fixed4(v) + (m.undefined.count(name) ? " (undefined)" : "");
  };
  if (row == "Accuracy") return fixed4(m.accuracy);
  if (row == "ROC AUC") return flagged(m.roc_auc, "roc_auc");
  if (row == "Precision") return flagged(m.precision, "precision");
  if (row == "Recall") return flagged(m.recall, "recall");
  if (row == "F1 Score") return flagged(m.f1, "f1");
  if (row == "False Positive Rate") return flagged(m.fpr, "fpr");
  return "[" + fixed4(m.ci_low) + ", " + fixed4(m.ci_high) + "]";
}

MetricSet metrics_from_json(const nlohmann::json& j) {
  MetricSet m;
  m.accuracy = j.at("accuracy");
  m.roc_auc = j.at("roc_auc");
  m.precision = j.at("precision");
  m.recall = j.at("recall");
  m.f1 = j.at("f1");
  m.fpr = j.at("fpr");
  m.ci_low = j.at("ci_low");
  m.ci_high = j.at("ci_high");
  const auto& c = j.at("confusion");
  m.confusion = {c.at("tp"), c.at("tn"), c.at("fp"), c.at("fn")};
  m.undefined = j.at("undefined").get<std::set<std::string>>();
  return m;
}

void write_chart(const std::vector<const ReportCell*>& cells, const std::string& family,
                 const fs::path& csv_path, const fs::path& svg_path) {
  {
    auto out = open_out(csv_path);
    csv::write_record(out, {"classifier", "scenario", "test_accuracy"});
    for (const auto* c : cells) {
      csv::write_record(out, {std::string(models::to_string(c->classifier)),
                              std::string(to_string(c->scenario)),
                              csv::format_number(c->test_metrics.accuracy)});
    }
  }
  // Grouped bars: one group per classifier, one bar per scenario.
  static constexpr const char* kColors[] = {"#4e79a7", "#f28e2b", "#59a14f"};
  constexpr int kBar = 18, kGap = 24, kHeight = 200, kLeft = 50, kTop = 30;
  std::vector<models::ClassifierKind> groups;
  for (const auto* c : cells) {
    if (std::find(groups.begin(), groups.end(), c->classifier) == groups.end()) {
      groups.push_back(c->classifier);
    }
  }
  const int group_width = 3 * kBar + kGap;
  const int width = kLeft + static_cast<int>(groups.size()) * group_width + 140;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << kHeight + kTop + 40 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"" << kLeft << "\" y=\"18\">" << family << " test accuracy</text>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + kHeight << "\" x2=\"" << width - 140
      << "\" y2=\"" << kTop + kHeight << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const int y = kTop + kHeight - tick * kHeight / 4;
    svg << "<text x=\"" << kLeft - 30 << "\" y=\"" << y + 4 << "\">" << fixed4(tick / 4.0).substr(0, 4)
        << "</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int x0 = kLeft + 10 + static_cast<int>(g) * group_width;
    for (const auto* c : cells) {
      if (c->classifier != groups[g]) continue;
      const auto s = scenario_rank(c->scenario);
      const int h = static_cast<int>(c->test_metrics.accuracy * kHeight + 0.5);
      svg << "<rect x=\"" << x0 + static_cast<int>(s) * kBar << "\" y=\"" << kTop + kHeight - h
          << "\" width=\"" << kBar - 2 << "\" height=\"" << h << "\" fill=\"" << kColors[s]
          << "\"/>\n";
    }
    svg << "<text x=\"" << x0 << "\" y=\"" << kTop + kHeight + 15 << "\">"
        << models::to_string(groups[g]) << "</text>\n";
  }
  for (std::size_t s = 0; s < std::size(kAllScenarios); ++s) {
    const int y = kTop + 10 + static_cast<int>(s) * 16;
    svg << "<rect x=\"" << width - 130 << "\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\""
        << kColors[s] << "\"/><text x=\"" << width - 115 << "\" y=\"" << y << "\">"
        << to_string(kAllScenarios[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  auto out = open_out(svg_path);
  out << svg.str();
}

}  // namespace

nlohmann::json ReportCell::to_json() const {
  return {
      {"family", family},
      {"scenario", std::string(to_string(scenario))},
      {"classifier", std::string(models::to_string(classifier))},
      {"params", params},
      {"cv_accuracy", cv_accuracy},
      {"val", val_metrics ? val_metrics->to_json() : nlohmann::json(nullptr)},
      {"test", test_metrics.to_json()},
  };
}

ReportCell ReportCell::from_json(const nlohmann::json& j) {
  try {
    ReportCell c;
    c.family = j.at("family");
    c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    c.classifier = models::classifier_from_string(j.at("classifier").get<std::string>());
    c.params = j.at("params");
    c.cv_accuracy = j.at("cv_accuracy");
    if (!j.at("val").is_null()) c.val_metrics = metrics_from_json(j.at("val"));
    c.test_metrics = metrics_from_json(j.at("test"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("aggregate record: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("aggregate record: ") + e.what());
  }
}

std::string family_slug(std::string_view family) {
  std::string out;
  bool pending = false;
  for (char ch : family) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      if (pending && !out.empty()) out += '_';
      pending = false;
      out += static_cast<char>(std::tolower(u));
    } else {
      pending = true;
    }
  }
  return out.empty() ? "family" : out;
}

ReportFiles emit_report(std::vector<ReportCell> cells, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw DataError("cannot create report directory " + out_dir);
  }
  auto key = [](const ReportCell& c) {
    return std::tuple(c.family, classifier_rank(c.classifier), scenario_rank(c.scenario));
  };
  std::sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (c.scenario == ScenarioKind::synth_to_real && !c.val_metrics) {
      throw DataError("report cell " + c.family + "/" + std::string(models::to_string(c.classifier)) +
                      " (synth_to_real) has no validation metrics");
    }
    if (i > 0 && key(cells[i - 1]) == key(c)) {
      throw DataError("duplicate report cell " + c.family + "/" +
                      std::string(models::to_string(c.classifier)) + "/" +
                      std::string(to_string(c.scenario)));
    }
  }

  const fs::path dir(out_dir);
  ReportFiles files;
  files.aggregate = (dir / "aggregate.jsonl").string();
  {
    auto out = open_out(files.aggregate);
    for (const auto& c : cells) out << c.to_json().dump() << '\n';
  }

  std::map<std::string, std::vector<const ReportCell*>> by_family;
  for (const auto& c : cells) by_family[c.family].push_back(&c);

  for (const auto& [family, fam_cells] : by_family) {
    const auto slug = family_slug(family);
    std::map<std::size_t, std::vector<const ReportCell*>> by_classifier;
    for (const auto* c : fam_cells) by_classifier[classifier_rank(c->classifier)].push_back(c);

    for (const auto& [rank, clf_cells] : by_classifier) {
      const auto clf = std::string(models::to_string(models::kAllClassifiers[rank]));
      const auto path = dir / ("table_" + slug + "_" + clf + ".csv");
      auto out = open_out(path);
      csv::Record header = {"metric"};
      for (auto s : kAllScenarios) header.emplace_back(to_string(s));
      csv::write_record(out, header);
      for (auto row : kMetricRows) {
        csv::Record rec = {std::string(row)};
        for (auto s : kAllScenarios) {
          auto it = std::find_if(clf_cells.begin(), clf_cells.end(),
                                 [&](const auto* c) { return c->scenario == s; });
          rec.push_back(it == clf_cells.end() ? "" : table_value((*it)->test_metrics, row));
        }
        csv::write_record(out, rec);
      }
      files.tables.push_back(path.string());

      for (const auto* c : clf_cells) {
        const auto cpath =
            dir / ("confusion_" + slug + "_" + clf + "_" + std::string(to_string(c->scenario)) + ".csv");
        auto cout = open_out(cpath);
        const auto& cm = c->test_metrics.confusion;
        csv::write_record(cout, {"", "predicted_benign", "predicted_malware"});
        csv::write_record(cout, {"actual_benign", std::to_string(cm.tn), std::to_string(cm.fp)});
        csv::write_record(cout, {"actual_malware", std::to_string(cm.fn), std::to_string(cm.tp)});
        files.confusions.push_back(cpath.string());
      }
    }

    const auto csv_path = dir / ("chart_" + slug + ".csv");
    const auto svg_path = dir / ("chart_" + slug + ".svg");
    write_chart(fam_cells, family, csv_path, svg_path);
    files.charts.push_back(csv_path.string());
    files.charts.push_back(svg_path.string());
  }
  return files;
}

std::vector<ReportCell> read_aggregate(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::vector<ReportCell> cells;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      cells.push_back(ReportCell::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cells;
}

}  // namespace droidsynth
