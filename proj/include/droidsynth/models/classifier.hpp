#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "droidsynth/dataset_prep.hpp"
#include "droidsynth/models/standardizer.hpp"

namespace droidsynth::models {

enum class ClassifierKind { knn, dtree, logreg, mlp, rforest };

inline constexpr ClassifierKind kAllClassifiers[] = {ClassifierKind::knn, ClassifierKind::dtree,
                                                     ClassifierKind::logreg, ClassifierKind::mlp,
                                                     ClassifierKind::rforest};

std::string_view to_string(ClassifierKind kind);
ClassifierKind classifier_from_string(std::string_view text);

struct KnnParams {
  int k = 5;
};

struct TreeParams {
  std::optional<int> max_depth;  // nullopt: unlimited
  int min_leaf = 1;
};

struct LogRegParams {
  double l2_strength = 0.1;
  int max_iters = 1000;
  double tol = 1e-6;
};

struct MlpParams {
  std::vector<int> hidden = {64};
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 200;
};

struct ForestParams {
  int n_trees = 100;
  std::optional<int> max_depth;
  int min_leaf = 1;
  bool bootstrap = true;
  std::optional<int> max_features;  // nullopt: floor(sqrt(n_features))
};

using ClassifierParams = std::variant<KnnParams, TreeParams, LogRegParams, MlpParams, ForestParams>;

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::knn;
  ClassifierParams params = KnnParams{};
  std::uint64_t seed = 0;

  static ClassifierSpec defaults(ClassifierKind kind, std::uint64_t seed = 0);
  // Throws UsageError when the parameters do not fit the kind or are out of range.
  void check() const;
  // Stable "k=5" / "max_depth=none;min_leaf=1" rendering for tables and files.
  std::string describe() const;
  // Inverse of describe(); keys left out keep their defaults.
  static ClassifierSpec parse(ClassifierKind kind, std::string_view text, std::uint64_t seed = 0);
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(MatrixView x, std::span<const int> y) = 0;
  // Class-1 probability per row.
  virtual std::vector<double> predict_proba(MatrixView x) const = 0;
  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;
};

std::unique_ptr<Classifier> make_classifier(const ClassifierSpec& spec);

// Probability -> label with the fixed 0.5 threshold; exactly 0.5 maps to 0.
inline int label_from_probability(double p) { return p > 0.5 ? 1 : 0; }

/// Standardizer + classifier pipeline fitted on one training matrix.
class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(ClassifierSpec spec, Standardizer standardizer,
               std::unique_ptr<Classifier> classifier, double cv_accuracy = 0.0);

  const ClassifierSpec& spec() const { return spec_; }
  const Standardizer& standardizer() const { return standardizer_; }
  double cv_accuracy() const { return cv_accuracy_; }
  void set_cv_accuracy(double a) { cv_accuracy_ = a; }

  std::vector<double> predict_proba(const FeatureMatrix& x) const;
  std::vector<int> predict(const FeatureMatrix& x) const;

  void save(std::ostream& out) const;
  static TrainedModel load(std::istream& in);

 private:
  ClassifierSpec spec_;
  Standardizer standardizer_;
  std::unique_ptr<Classifier> classifier_;
  double cv_accuracy_ = 0.0;
};

// Fits the standardizer on `train` only, then the classifier on the scaled rows.
TrainedModel fit_model(const ClassifierSpec& spec, const FeatureMatrix& train);

double accuracy(std::span<const int> y_true, std::span<const int> y_pred);

}  // namespace droidsynth::models
