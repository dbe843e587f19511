#include "droidsynth/models/decision_tree.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "droidsynth/error.hpp"
#include "serial.hpp"

namespace droidsynth::models {
namespace {

double gini(double positives, double total) {
  if (total <= 0.0) return 0.0;
  const double p = positives / total;
  return 2.0 * p * (1.0 - p);
}

constexpr double kMinGain = 1e-12;

}  // namespace

void CartTree::fit(MatrixView x, std::span<const int> y, std::vector<std::size_t> rows,
                   const TreeGrowth& growth, Rng* rng) {
  if (x.rows != y.size()) throw DataError("tree: row/label count mismatch");
  if (rows.empty()) throw DataError("tree: no training rows");
  if (growth.min_leaf < 1) throw UsageError("tree: min_leaf must be >= 1");
  nodes_.clear();
  grow(x, y, rows, 0, growth, rng);
}

int CartTree::grow(MatrixView x, std::span<const int> y, std::vector<std::size_t>& rows,
                   int depth, const TreeGrowth& growth, Rng* rng) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  const double n = static_cast<double>(rows.size());
  double positives = 0.0;
  for (std::size_t r : rows) positives += y[r];
  nodes_[id].probability = positives / n;

  const bool pure = positives == 0.0 || positives == n;
  const bool depth_limited = growth.max_depth && depth >= *growth.max_depth;
  const std::size_t min_leaf = static_cast<std::size_t>(growth.min_leaf);
  if (pure || depth_limited || rows.size() < 2 * min_leaf) return id;

  // Candidate features, ascending so ties resolve toward the lowest index.
  std::vector<std::size_t> features(x.cols);
  std::iota(features.begin(), features.end(), std::size_t{0});
  if (growth.max_features && static_cast<std::size_t>(*growth.max_features) < x.cols) {
    if (!rng) throw UsageError("tree: feature subsampling needs a random source");
    const std::size_t m = static_cast<std::size_t>(std::max(1, *growth.max_features));
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng->below(x.cols - i));
      std::swap(features[i], features[j]);
    }
    features.resize(m);
    std::sort(features.begin(), features.end());
  }

  const double parent = gini(positives, n);
  double best_gain = kMinGain;
  int best_feature = -1;
  double best_threshold = 0.0;

  std::vector<std::pair<double, int>> column(rows.size());
  for (std::size_t f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x.at(rows[i], f), y[rows[i]]};
    std::sort(column.begin(), column.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left_pos = 0.0;
    for (std::size_t i = 0; i + 1 < column.size(); ++i) {
      left_pos += column[i].second;
      if (column[i].first == column[i + 1].first) continue;
      const std::size_t left_n = i + 1;
      const std::size_t right_n = column.size() - left_n;
      if (left_n < min_leaf || right_n < min_leaf) continue;
      const double ln = static_cast<double>(left_n);
      const double rn = static_cast<double>(right_n);
      const double child = (ln * gini(left_pos, ln) + rn * gini(positives - left_pos, rn)) / n;
      const double gain = parent - child;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = static_cast<int>(f);
        double mid = 0.5 * (column[i].first + column[i + 1].first);
        if (!(mid < column[i + 1].first)) mid = column[i].first;
        best_threshold = mid;
      }
    }
  }
  if (best_feature < 0) return id;

  std::vector<std::size_t> left, right;
  for (std::size_t r : rows) {
    (x.at(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();
  nodes_[id].feature = best_feature;
  nodes_[id].threshold = best_threshold;
  const int l = grow(x, y, left, depth + 1, growth, rng);
  nodes_[id].left = l;
  const int r = grow(x, y, right, depth + 1, growth, rng);
  nodes_[id].right = r;
  return id;
}

double CartTree::predict_one(std::span<const double> row) const {
  int id = 0;
  while (nodes_[id].feature >= 0) {
    const Node& node = nodes_[id];
    id = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes_[id].probability;
}

int CartTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

void CartTree::save(std::ostream& out) const {
  out << "tree " << nodes_.size() << '\n';
  for (const auto& n : nodes_) {
    out << n.feature << ' ' << serial::fmt(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
        << serial::fmt(n.probability) << '\n';
  }
}

void CartTree::load(std::istream& in) {
  serial::expect(in, "tree");
  nodes_.resize(serial::read<std::size_t>(in));
  for (auto& n : nodes_) {
    n.feature = serial::read<int>(in);
    n.threshold = serial::read<double>(in);
    n.left = serial::read<int>(in);
    n.right = serial::read<int>(in);
    n.probability = serial::read<double>(in);
  }
}

void DecisionTreeClassifier::fit(MatrixView x, std::span<const int> y) {
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  tree_.fit(x, y, std::move(rows), {params_.max_depth, params_.min_leaf, std::nullopt});
}

std::vector<double> DecisionTreeClassifier::predict_proba(MatrixView x) const {
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) out[r] = tree_.predict_one(x.row(r));
  return out;
}

void DecisionTreeClassifier::save(std::ostream& out) const { tree_.save(out); }
void DecisionTreeClassifier::load(std::istream& in) { tree_.load(in); }

}  // namespace droidsynth::models
