#include "droidsynth/models/classifier.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "droidsynth/error.hpp"
#include "droidsynth/models/decision_tree.hpp"
#include "droidsynth/models/knn.hpp"
#include "droidsynth/models/logistic_regression.hpp"
#include "droidsynth/models/mlp.hpp"
#include "droidsynth/models/random_forest.hpp"
#include "serial.hpp"

namespace droidsynth::models {
namespace {

std::string opt_int(const std::optional<int>& v, std::string_view none = "none") {
  return v ? std::to_string(*v) : std::string(none);
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int parse_int(std::string_view key, std::string_view text) {
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw UsageError("classifier parameter " + std::string(key) + ": not an integer: '" +
                     std::string(text) + "'");
  }
  return v;
}

double parse_double(std::string_view key, std::string_view text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(text), &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("classifier parameter " + std::string(key) + ": not a number: '" +
                   std::string(text) + "'");
}

std::optional<int> parse_opt_int(std::string_view key, std::string_view text) {
  if (text == "none" || text == "auto") return std::nullopt;
  return parse_int(key, text);
}

std::map<std::string, std::string, std::less<>> split_pairs(std::string_view text) {
  std::map<std::string, std::string, std::less<>> out;
  while (!text.empty()) {
    const auto semi = text.find(';');
    std::string_view item = text.substr(0, semi);
    text = semi == std::string_view::npos ? std::string_view{} : text.substr(semi + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("classifier parameters: expected key=value, got '" + std::string(item) + "'");
    }
    out[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
  }
  return out;
}

template <typename Params>
const Params& params_as(const ClassifierSpec& spec) {
  const auto* p = std::get_if<Params>(&spec.params);
  if (!p) {
    throw UsageError("classifier " + std::string(to_string(spec.kind)) +
                     ": parameter set does not match the kind");
  }
  return *p;
}

}  // namespace

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::dtree: return "dtree";
    case ClassifierKind::logreg: return "logreg";
    case ClassifierKind::mlp: return "mlp";
    case ClassifierKind::rforest: return "rforest";
  }
  return "?";
}

ClassifierKind classifier_from_string(std::string_view text) {
  for (auto k : kAllClassifiers) {
    if (to_string(k) == text) return k;
  }
  throw UsageError("unknown classifier '" + std::string(text) +
                   "' (expected knn, dtree, logreg, mlp or rforest)");
}

ClassifierSpec ClassifierSpec::defaults(ClassifierKind kind, std::uint64_t seed) {
  ClassifierSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  switch (kind) {
    case ClassifierKind::knn: spec.params = KnnParams{}; break;
    case ClassifierKind::dtree: spec.params = TreeParams{}; break;
    case ClassifierKind::logreg: spec.params = LogRegParams{}; break;
    case ClassifierKind::mlp: spec.params = MlpParams{}; break;
    case ClassifierKind::rforest: spec.params = ForestParams{}; break;
  }
  return spec;
}

void ClassifierSpec::check() const {
  switch (kind) {
    case ClassifierKind::knn:
      if (params_as<KnnParams>(*this).k < 1) throw UsageError("knn: k must be >= 1");
      break;
    case ClassifierKind::dtree: {
      const auto& p = params_as<TreeParams>(*this);
      if (p.max_depth && *p.max_depth < 1) throw UsageError("dtree: max_depth must be >= 1");
      if (p.min_leaf < 1) throw UsageError("dtree: min_leaf must be >= 1");
      break;
    }
    case ClassifierKind::logreg: {
      const auto& p = params_as<LogRegParams>(*this);
      if (!(p.l2_strength >= 0.0)) throw UsageError("logreg: l2 must be >= 0");
      if (p.max_iters < 1) throw UsageError("logreg: max_iters must be >= 1");
      if (!(p.tol > 0.0)) throw UsageError("logreg: tol must be > 0");
      break;
    }
    case ClassifierKind::mlp: {
      const auto& p = params_as<MlpParams>(*this);
      if (p.hidden.empty()) throw UsageError("mlp: at least one hidden layer is required");
      for (int h : p.hidden) {
        if (h < 1) throw UsageError("mlp: hidden layer sizes must be >= 1");
      }
      if (!(p.learning_rate > 0.0)) throw UsageError("mlp: lr must be > 0");
      if (p.batch_size < 1) throw UsageError("mlp: batch must be >= 1");
      if (p.epochs < 1) throw UsageError("mlp: epochs must be >= 1");
      break;
    }
    case ClassifierKind::rforest: {
      const auto& p = params_as<ForestParams>(*this);
      if (p.n_trees < 1) throw UsageError("rforest: n_trees must be >= 1");
      if (p.max_depth && *p.max_depth < 1) throw UsageError("rforest: max_depth must be >= 1");
      if (p.min_leaf < 1) throw UsageError("rforest: min_leaf must be >= 1");
      if (p.max_features && *p.max_features < 1) {
        throw UsageError("rforest: max_features must be >= 1");
      }
      break;
    }
  }
}

std::string ClassifierSpec::describe() const {
  switch (kind) {
    case ClassifierKind::knn:
      return "k=" + std::to_string(params_as<KnnParams>(*this).k);
    case ClassifierKind::dtree: {
      const auto& p = params_as<TreeParams>(*this);
      return "max_depth=" + opt_int(p.max_depth) + ";min_leaf=" + std::to_string(p.min_leaf);
    }
    case ClassifierKind::logreg: {
      const auto& p = params_as<LogRegParams>(*this);
      return "l2=" + num(p.l2_strength) + ";max_iters=" + std::to_string(p.max_iters) +
             ";tol=" + num(p.tol);
    }
    case ClassifierKind::mlp: {
      const auto& p = params_as<MlpParams>(*this);
      std::string hidden;
      for (std::size_t i = 0; i < p.hidden.size(); ++i) {
        if (i) hidden += 'x';
        hidden += std::to_string(p.hidden[i]);
      }
      return "hidden=" + hidden + ";lr=" + num(p.learning_rate) +
             ";batch=" + std::to_string(p.batch_size) + ";epochs=" + std::to_string(p.epochs);
    }
    case ClassifierKind::rforest: {
      const auto& p = params_as<ForestParams>(*this);
      return "n_trees=" + std::to_string(p.n_trees) + ";max_depth=" + opt_int(p.max_depth) +
             ";min_leaf=" + std::to_string(p.min_leaf) +
             ";bootstrap=" + (p.bootstrap ? "1" : "0") +
             ";max_features=" + opt_int(p.max_features, "auto");
    }
  }
  return {};
}

ClassifierSpec ClassifierSpec::parse(ClassifierKind kind, std::string_view text,
                                     std::uint64_t seed) {
  ClassifierSpec spec = defaults(kind, seed);
  for (const auto& [key, value] : split_pairs(text)) {
    bool known = true;
    switch (kind) {
      case ClassifierKind::knn: {
        auto& p = std::get<KnnParams>(spec.params);
        if (key == "k") p.k = parse_int(key, value);
        else known = false;
        break;
      }
      case ClassifierKind::dtree: {
        auto& p = std::get<TreeParams>(spec.params);
        if (key == "max_depth") p.max_depth = parse_opt_int(key, value);
        else if (key == "min_leaf") p.min_leaf = parse_int(key, value);
        else known = false;
        break;
      }
      case ClassifierKind::logreg: {
        auto& p = std::get<LogRegParams>(spec.params);
        if (key == "l2") p.l2_strength = parse_double(key, value);
        else if (key == "max_iters") p.max_iters = parse_int(key, value);
        else if (key == "tol") p.tol = parse_double(key, value);
        else known = false;
        break;
      }
      case ClassifierKind::mlp: {
        auto& p = std::get<MlpParams>(spec.params);
        if (key == "hidden") {
          p.hidden.clear();
          std::string_view rest = value;
          while (!rest.empty()) {
            const auto x = rest.find('x');
            p.hidden.push_back(parse_int(key, rest.substr(0, x)));
            rest = x == std::string_view::npos ? std::string_view{} : rest.substr(x + 1);
          }
        } else if (key == "lr") {
          p.learning_rate = parse_double(key, value);
        } else if (key == "batch") {
          p.batch_size = parse_int(key, value);
        } else if (key == "epochs") {
          p.epochs = parse_int(key, value);
        } else {
          known = false;
        }
        break;
      }
      case ClassifierKind::rforest: {
        auto& p = std::get<ForestParams>(spec.params);
        if (key == "n_trees") p.n_trees = parse_int(key, value);
        else if (key == "max_depth") p.max_depth = parse_opt_int(key, value);
        else if (key == "min_leaf") p.min_leaf = parse_int(key, value);
        else if (key == "bootstrap") p.bootstrap = parse_int(key, value) != 0;
        else if (key == "max_features") p.max_features = parse_opt_int(key, value);
        else known = false;
        break;
      }
    }
    if (!known) {
      throw UsageError("classifier " + std::string(to_string(kind)) + ": unknown parameter '" +
                       key + "'");
    }
  }
  spec.check();
  return spec;
}

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec) {
  spec.check();
  switch (spec.kind) {
    case ClassifierKind::knn:
      return std::make_unique<KnnClassifier>(std::get<KnnParams>(spec.params));
    case ClassifierKind::dtree:
      return std::make_unique<DecisionTreeClassifier>(std::get<TreeParams>(spec.params));
    case ClassifierKind::logreg:
      return std::make_unique<LogisticRegression>(std::get<LogRegParams>(spec.params));
    case ClassifierKind::mlp:
      return std::make_unique<MlpClassifier>(std::get<MlpParams>(spec.params), spec.seed);
    case ClassifierKind::rforest:
      return std::make_unique<RandomForest>(std::get<ForestParams>(spec.params), spec.seed);
  }
  throw UsageError("unknown classifier kind");
}

TrainedModel::TrainedModel(ClassifierSpec spec, Standardizer standardizer,
                           std::unique_ptr<Classifier> classifier, double cv_accuracy)
    : spec_(std::move(spec)),
      standardizer_(std::move(standardizer)),
      classifier_(std::move(classifier)),
      cv_accuracy_(cv_accuracy) {}

std::vector<double> TrainedModel::predict_proba(const FeatureMatrix& x) const {
  if (!classifier_) throw DataError("model is not fitted");
  const auto scaled = standardizer_.transform(MatrixView::of(x));
  return classifier_->predict_proba(MatrixView::of(scaled, x.cols()));
}

std::vector<int> TrainedModel::predict(const FeatureMatrix& x) const {
  const auto p = predict_proba(x);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = label_from_probability(p[i]);
  return out;
}

void TrainedModel::save(std::ostream& out) const {
  if (!classifier_) throw DataError("model is not fitted");
  out << "droidsynth-model 1\n";
  out << "classifier " << to_string(spec_.kind) << ' ' << spec_.describe() << '\n';
  out << "seed " << spec_.seed << '\n';
  out << "cv_accuracy " << serial::fmt(cv_accuracy_) << '\n';
  standardizer_.save(out);
  classifier_->save(out);
}

TrainedModel TrainedModel::load(std::istream& in) {
  serial::expect(in, "droidsynth-model");
  if (serial::read<int>(in) != 1) throw DataError("model file: unsupported version");
  serial::expect(in, "classifier");
  const auto kind = classifier_from_string(serial::read<std::string>(in));
  const auto params = serial::read<std::string>(in);
  serial::expect(in, "seed");
  const auto seed = serial::read<std::uint64_t>(in);
  serial::expect(in, "cv_accuracy");
  const double cv = serial::read<double>(in);
  ClassifierSpec spec;
  try {
    spec = ClassifierSpec::parse(kind, params, seed);
  } catch (const UsageError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  Standardizer standardizer = Standardizer::load(in);
  auto classifier = make_classifier(spec);
  classifier->load(in);
  return TrainedModel(std::move(spec), std::move(standardizer), std::move(classifier), cv);
}

TrainedModel fit_model(const ClassifierSpec& spec, const FeatureMatrix& train) {
  if (train.rows() == 0) throw DataError("cannot fit " + std::string(to_string(spec.kind)) +
                                         " on an empty training matrix");
  const auto view = MatrixView::of(train);
  Standardizer standardizer = Standardizer::fit(view);
  const auto scaled = standardizer.transform(view);
  auto classifier = make_classifier(spec);
  classifier->fit(MatrixView::of(scaled, train.cols()), train.labels());
  return TrainedModel(spec, std::move(standardizer), std::move(classifier));
}

double accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw DataError("accuracy: length mismatch");
  if (y_true.empty()) throw DataError("accuracy: no rows");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i];
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

}  // namespace droidsynth::models
