#pragma once

#include <vector>

#include "droidsynth/models/classifier.hpp"

namespace droidsynth::models {

/// Brute-force k-nearest-neighbour classifier under Euclidean distance.
///
/// The class-1 probability is the share of label-1 rows among the k nearest
/// training rows. Distance ties at the k-th position go to the lower training
/// row index.
class KnnClassifier final : public Classifier {
 public:
  explicit KnnClassifier(KnnParams params = {}) : params_(params) {}

  void fit(MatrixView x, std::span<const int> y) override;
  std::vector<double> predict_proba(MatrixView x) const override;
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  // Training-row indices of the k nearest rows to `query`, nearest first.
  std::vector<std::size_t> neighbors(std::span<const double> query) const;

 private:
  KnnParams params_;
  std::size_t cols_ = 0;
  std::vector<double> train_;
  std::vector<int> labels_;
};

}  // namespace droidsynth::models
