#include "droidsynth/models/random_forest.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "droidsynth/error.hpp"
#include "serial.hpp"

namespace droidsynth::models {

void RandomForest::fit(MatrixView x, std::span<const int> y) {
  if (params_.n_trees < 1) throw UsageError("forest: n_trees must be >= 1");
  const int features = params_.max_features
                           ? *params_.max_features
                           : std::max(1, static_cast<int>(std::floor(std::sqrt(double(x.cols)))));
  TreeGrowth growth{params_.max_depth, params_.min_leaf, features};
  trees_.assign(static_cast<std::size_t>(params_.n_trees), {});
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    Rng rng(mix_seed(seed_, t));
    std::vector<std::size_t> rows(x.rows);
    if (params_.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(x.rows));
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    trees_[t].fit(x, y, std::move(rows), growth, &rng);
  }
}

std::vector<double> RandomForest::predict_proba(MatrixView x) const {
  std::vector<double> out(x.rows, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree.predict_one(x.row(r));
    out[r] = sum / static_cast<double>(trees_.size());
  }
  return out;
}

void RandomForest::save(std::ostream& out) const {
  out << "forest " << trees_.size() << '\n';
  for (const auto& t : trees_) t.save(out);
}

void RandomForest::load(std::istream& in) {
  serial::expect(in, "forest");
  trees_.resize(serial::read<std::size_t>(in));
  for (auto& t : trees_) t.load(in);
}

}  // namespace droidsynth::models
