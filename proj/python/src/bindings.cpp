#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "droidsynth/error.hpp"
#include "droidsynth/metrics.hpp"
#include "droidsynth/models/classifier.hpp"
#include "droidsynth/sanitizer.hpp"
#include "droidsynth/scenarios.hpp"
#include "droidsynth/synth_gen.hpp"

namespace py = pybind11;
using namespace droidsynth;

namespace {

using Array2d = py::array_t<double, py::array::c_style | py::array::forcecast>;

FeatureMatrix to_matrix(const Array2d& x, std::vector<int> labels) {
  if (x.ndim() != 2) throw UsageError("expected a 2-D feature array");
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto cols = static_cast<std::size_t>(x.shape(1));
  if (labels.empty()) labels.assign(rows, 0);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cols; ++c) names.push_back("f" + std::to_string(c));
  std::vector<double> values(x.data(), x.data() + rows * cols);
  return FeatureMatrix(std::move(names), std::move(values), std::move(labels));
}

py::dict metric_dict(const MetricSet& m) {
  return py::module_::import("json").attr("loads")(m.to_json().dump());
}

py::dict confusion_dict(const ConfusionMatrix& cm) {
  py::dict d;
  d["tp"] = cm.tp;
  d["tn"] = cm.tn;
  d["fp"] = cm.fp;
  d["fn"] = cm.fn;
  return d;
}

py::dict validate(const std::string& record_text, const std::vector<std::string>& columns,
                  const std::string& family, const std::string& alias) {
  auto map = SanitizationMap::for_family(family, alias);
  const auto layout = RecordLayout::from_schema(FeatureSchema::from_header(columns), map);
  const auto report = validate_record(CandidateRecord::from_text(record_text), layout);
  py::dict d;
  d["verdict"] = std::string(to_string(report.verdict));
  py::list violations;
  for (const auto& v : report.violations) violations.append(py::make_tuple(v.rule, v.detail));
  d["violations"] = violations;
  d["record"] = report.record.is_null() ? py::object(py::none())
                                        : py::object(py::str(compact_json_dumps(report.record)));
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the droidsynth core library";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<LeakageError>(m, "LeakageError", PyExc_RuntimeError);
  py::register_exception<ProviderError>(m, "ProviderError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      py::set_error(PyExc_ValueError, e.what());
    }
  });

  // metrics
  m.def("confusion", [](const std::vector<int>& t, const std::vector<int>& p) {
    return confusion_dict(confusion(t, p));
  }, py::arg("y_true"), py::arg("y_pred"));
  m.def("basic_metrics", [](const std::vector<int>& t, const std::vector<int>& p) {
    const auto b = basic_metrics(confusion(t, p));
    py::dict d;
    d["accuracy"] = b.accuracy;
    d["precision"] = b.precision;
    d["recall"] = b.recall;
    d["f1"] = b.f1;
    d["fpr"] = b.fpr;
    d["undefined"] = b.undefined;
    return d;
  }, py::arg("y_true"), py::arg("y_pred"));
  m.def("roc_auc", [](const std::vector<double>& s, const std::vector<int>& t) { return roc_auc(s, t); },
        py::arg("scores"), py::arg("y_true"));
  m.def("bootstrap_ci", [](const std::vector<int>& t, const std::vector<int>& p, int resamples,
                           std::uint64_t seed, double level) {
    const auto ci = bootstrap_ci(t, p, resamples, seed, level);
    return py::make_tuple(ci.low, ci.high);
  }, py::arg("y_true"), py::arg("y_pred"), py::arg("resamples") = 1000, py::arg("seed") = 0,
        py::arg("level") = 0.95);
  m.def("evaluate_predictions", [](const std::vector<int>& t, const std::vector<int>& p,
                                   const std::vector<double>& s, std::uint64_t seed, int resamples) {
    return metric_dict(evaluate_predictions(t, p, s, seed, resamples));
  }, py::arg("y_true"), py::arg("y_pred"), py::arg("scores"), py::arg("seed") = 0,
        py::arg("resamples") = 1000);

  // sanitizer and validator
  m.def("sanitize", [](const std::string& family, const std::string& text, const std::string& alias) {
    return SanitizationMap::for_family(family, alias).sanitize(text);
  }, py::arg("family"), py::arg("text"), py::arg("alias") = "");
  m.def("desanitize", [](const std::string& family, const std::string& text, const std::string& alias) {
    return SanitizationMap::for_family(family, alias).desanitize(text);
  }, py::arg("family"), py::arg("text"), py::arg("alias") = "");
  m.def("validate_record", &validate, py::arg("record"), py::arg("columns"), py::arg("family"),
        py::arg("alias") = "",
        "Validates one generated record (JSON text) against the original column names.");

  // splitting and hashing
  m.def("stratified_split", [](const std::vector<int>& labels, double fraction, std::uint64_t seed) {
    const auto s = stratified_split(labels, fraction, seed);
    return py::make_tuple(s.part_a, s.part_b);
  }, py::arg("labels"), py::arg("fraction"), py::arg("seed"));
  m.def("row_hash", [](const std::vector<double>& row) { return row_hash(row); }, py::arg("row"));

  // models
  py::class_<models::TrainedModel>(m, "Model")
      .def_property_readonly("kind", [](const models::TrainedModel& t) {
        return std::string(models::to_string(t.spec().kind));
      })
      .def_property_readonly("params", [](const models::TrainedModel& t) { return t.spec().describe(); })
      .def("predict_proba", [](const models::TrainedModel& t, const Array2d& x) {
        return t.predict_proba(to_matrix(x, {}));
      }, py::arg("x"))
      .def("predict", [](const models::TrainedModel& t, const Array2d& x) {
        return t.predict(to_matrix(x, {}));
      }, py::arg("x"))
      .def("save", [](const models::TrainedModel& t) {
        std::ostringstream out;
        t.save(out);
        return out.str();
      })
      .def_static("load", [](const std::string& text) {
        std::istringstream in(text);
        return models::TrainedModel::load(in);
      }, py::arg("text"));

  m.def("train", [](const std::string& kind, const Array2d& x, const std::vector<int>& y,
                    const std::string& params, std::uint64_t seed) {
    const auto k = models::classifier_from_string(kind);
    const auto spec = params.empty() ? models::ClassifierSpec::defaults(k, seed)
                                     : models::ClassifierSpec::parse(k, params, seed);
    return models::fit_model(spec, to_matrix(x, y));
  }, py::arg("kind"), py::arg("x"), py::arg("y"), py::arg("params") = "", py::arg("seed") = 0,
        "Standardizes x and fits one classifier (knn, dtree, logreg, mlp, rforest).");
}
