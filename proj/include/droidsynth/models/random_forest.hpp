#pragma once

#include <vector>

#include "droidsynth/models/decision_tree.hpp"

namespace droidsynth::models {

/// Bagged CART trees with per-split feature subsampling. Each tree draws a
/// bootstrap resample of the rows (unless disabled) and considers
/// max_features (default floor(sqrt(n_features))) random candidates at each
/// split. The class-1 probability is the mean of the trees' leaf values.
class RandomForest final : public Classifier {
 public:
  explicit RandomForest(ForestParams params = {}, std::uint64_t seed = 0)
      : params_(params), seed_(seed) {}

  void fit(MatrixView x, std::span<const int> y) override;
  std::vector<double> predict_proba(MatrixView x) const override;
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const std::vector<CartTree>& trees() const { return trees_; }

 private:
  ForestParams params_;
  std::uint64_t seed_;
  std::vector<CartTree> trees_;
};

}  // namespace droidsynth::models
