#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "droidsynth/models/classifier.hpp"

namespace droidsynth::models {

// Candidate hyperparameter settings per classifier kind, in search order.
class HyperGrid {
 public:
  // kNN k {3,5,7}; dtree max_depth {8,16,none} x min_leaf {1,5};
  // logreg l2 {0.01,0.1,1}; mlp hidden {64},{128} (lr 1e-3, batch 32,
  // 200 epochs); rforest n_trees {100,200} x max_depth {16,none}.
  static HyperGrid defaults();

  // Throws UsageError on an empty list or a spec of another kind.
  void set(ClassifierKind kind, std::vector<ClassifierSpec> points);
  // Throws UsageError when the kind has no points.
  const std::vector<ClassifierSpec>& points(ClassifierKind kind) const;

 private:
  std::map<ClassifierKind, std::vector<ClassifierSpec>> points_;
};

// Validation-row indices for each of `folds` folds, ascending within a fold.
// Each class is shuffled under the seed and dealt round-robin, so every fold
// holds within one row of each class's share. Throws DataError when a class
// has fewer rows than folds.
std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, int folds,
                                                       std::uint64_t seed);

struct CvRow {
  ClassifierSpec spec;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
};

struct CvResult {
  std::vector<CvRow> table;
  std::size_t best_index = 0;
  TrainedModel model;  // best spec re-fit on the full training matrix

  void write_csv(std::ostream& out) const;
};

// Called after each standardizer fit with the training rows it saw. `fold`
// is -1 for the final re-fit on the full training matrix.
using FitObserver = std::function<void(std::size_t grid_index, int fold,
                                       std::span<const std::size_t> train_rows,
                                       const Standardizer& standardizer)>;

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  std::size_t max_threads = 0;  // 0: hardware concurrency
  FitObserver observer;
};

// Scores every grid point by mean validation-fold accuracy, picks the first
// maximum in grid order and re-fits it on all of `train`. Grid points inherit
// their own seeds; the fold assignment uses options.seed.
CvResult grid_search_cv(std::span<const ClassifierSpec> grid, const FeatureMatrix& train,
                        const CvOptions& options = {});

}  // namespace droidsynth::models
