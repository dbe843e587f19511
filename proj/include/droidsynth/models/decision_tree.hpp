#pragma once

#include <optional>
#include <vector>

#include "droidsynth/models/classifier.hpp"
#include "droidsynth/rng.hpp"

namespace droidsynth::models {

struct TreeGrowth {
  std::optional<int> max_depth;
  int min_leaf = 1;
  // Candidate features per split; nullopt means all of them.
  std::optional<int> max_features;
};

/// Binary CART tree grown greedily on Gini impurity.
///
/// Thresholds are midpoints between consecutive distinct values and rows with
/// x <= threshold go left. A node becomes a leaf when it is pure, reaches
/// max_depth, cannot give both children min_leaf rows, or its best split has
/// zero impurity reduction. Leaves store the class-1 share of their rows.
class CartTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double probability = 0.0;
  };

  // `rows` may repeat indices (bootstrap). `rng` is only consulted when
  // growth.max_features limits the candidate set.
  void fit(MatrixView x, std::span<const int> y, std::vector<std::size_t> rows,
           const TreeGrowth& growth, Rng* rng = nullptr);

  double predict_one(std::span<const double> row) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  int grow(MatrixView x, std::span<const int> y, std::vector<std::size_t>& rows, int depth,
           const TreeGrowth& growth, Rng* rng);

  std::vector<Node> nodes_;
};

class DecisionTreeClassifier final : public Classifier {
 public:
  explicit DecisionTreeClassifier(TreeParams params = {}) : params_(params) {}

  void fit(MatrixView x, std::span<const int> y) override;
  std::vector<double> predict_proba(MatrixView x) const override;
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const CartTree& tree() const { return tree_; }

 private:
  TreeParams params_;
  CartTree tree_;
};

}  // namespace droidsynth::models
