#include "droidsynth/models/grid_search.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>

#include "droidsynth/csv.hpp"
#include "droidsynth/error.hpp"
#include "droidsynth/parallel.hpp"
#include "droidsynth/rng.hpp"

namespace droidsynth::models {

HyperGrid HyperGrid::defaults() {
  HyperGrid grid;
  std::vector<ClassifierSpec> knn, dtree, logreg, mlp, forest;
  for (int k : {3, 5, 7}) knn.push_back({ClassifierKind::knn, KnnParams{k}, 0});
  for (std::optional<int> depth : {std::optional<int>(8), std::optional<int>(16), std::optional<int>()}) {
    for (int leaf : {1, 5}) dtree.push_back({ClassifierKind::dtree, TreeParams{depth, leaf}, 0});
  }
  for (double l2 : {0.01, 0.1, 1.0}) {
    LogRegParams p;
    p.l2_strength = l2;
    logreg.push_back({ClassifierKind::logreg, p, 0});
  }
  for (int h : {64, 128}) {
    MlpParams p;
    p.hidden = {h};
    mlp.push_back({ClassifierKind::mlp, p, 0});
  }
  for (int trees : {100, 200}) {
    for (std::optional<int> depth : {std::optional<int>(16), std::optional<int>()}) {
      ForestParams p;
      p.n_trees = trees;
      p.max_depth = depth;
      forest.push_back({ClassifierKind::rforest, p, 0});
    }
  }
  grid.set(ClassifierKind::knn, std::move(knn));
  grid.set(ClassifierKind::dtree, std::move(dtree));
  grid.set(ClassifierKind::logreg, std::move(logreg));
  grid.set(ClassifierKind::mlp, std::move(mlp));
  grid.set(ClassifierKind::rforest, std::move(forest));
  return grid;
}

void HyperGrid::set(ClassifierKind kind, std::vector<ClassifierSpec> points) {
  if (points.empty()) {
    throw UsageError("hyperparameter grid for " + std::string(to_string(kind)) + " is empty");
  }
  for (const auto& p : points) {
    if (p.kind != kind) {
      throw UsageError("hyperparameter grid for " + std::string(to_string(kind)) +
                       " contains a " + std::string(to_string(p.kind)) + " point");
    }
    p.check();
  }
  points_[kind] = std::move(points);
}

const std::vector<ClassifierSpec>& HyperGrid::points(ClassifierKind kind) const {
  auto it = points_.find(kind);
  if (it == points_.end()) {
    throw UsageError("no hyperparameter grid for " + std::string(to_string(kind)));
  }
  return it->second;
}

std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, int folds,
                                                       std::uint64_t seed) {
  if (folds < 2) throw UsageError("cross-validation needs at least 2 folds");
  const auto k = static_cast<std::size_t>(folds);
  std::vector<std::vector<std::size_t>> out(k);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) rows.push_back(i);
    }
    if (rows.size() < k) {
      throw DataError("class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                      " rows, fewer than the " + std::to_string(folds) + " cv folds");
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(rows);
    for (std::size_t i = 0; i < rows.size(); ++i) out[i % k].push_back(rows[i]);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

void CvResult::write_csv(std::ostream& out) const {
  const std::size_t folds = table.empty() ? 0 : table.front().fold_accuracy.size();
  std::vector<std::string> header = {"grid_index", "classifier", "params"};
  for (std::size_t f = 0; f < folds; ++f) header.push_back("fold_" + std::to_string(f + 1));
  header.push_back("mean_accuracy");
  header.push_back("selected");
  csv::write_record(out, header);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table[i];
    std::vector<std::string> fields = {std::to_string(i), std::string(to_string(row.spec.kind)),
                                       row.spec.describe()};
    for (double a : row.fold_accuracy) fields.push_back(csv::format_number(a));
    fields.push_back(csv::format_number(row.mean_accuracy));
    fields.push_back(i == best_index ? "1" : "0");
    csv::write_record(out, fields);
  }
}

CvResult grid_search_cv(std::span<const ClassifierSpec> grid, const FeatureMatrix& train,
                        const CvOptions& options) {
  if (grid.empty()) throw UsageError("grid search needs at least one grid point");
  for (const auto& spec : grid) spec.check();
  const auto folds = stratified_kfold(train.labels(), options.folds, options.seed);
  const std::size_t k = folds.size();

  // Training rows per fold: everything outside that fold's validation rows.
  std::vector<std::vector<std::size_t>> fit_rows(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<char> held(train.rows(), 0);
    for (auto r : folds[f]) held[r] = 1;
    for (std::size_t r = 0; r < train.rows(); ++r) {
      if (!held[r]) fit_rows[f].push_back(r);
    }
  }

  std::vector<std::vector<double>> scores(grid.size(), std::vector<double>(k, 0.0));
  std::mutex observer_mutex;
  parallel_for(
      grid.size() * k,
      [&](std::size_t task) {
        const std::size_t g = task / k;
        const std::size_t f = task % k;
        const auto fit_part = train.select_rows(fit_rows[f]);
        const auto val_part = train.select_rows(folds[f]);
        const auto model = fit_model(grid[g], fit_part);
        if (options.observer) {
          std::lock_guard lock(observer_mutex);
          options.observer(g, static_cast<int>(f), fit_rows[f], model.standardizer());
        }
        scores[g][f] = accuracy(val_part.labels(), model.predict(val_part));
      },
      options.max_threads);

  CvResult result;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CvRow row{grid[g], scores[g], 0.0};
    row.mean_accuracy = std::accumulate(scores[g].begin(), scores[g].end(), 0.0) / static_cast<double>(k);
    result.table.push_back(std::move(row));
  }
  for (std::size_t g = 1; g < result.table.size(); ++g) {
    if (result.table[g].mean_accuracy > result.table[result.best_index].mean_accuracy) {
      result.best_index = g;
    }
  }

  result.model = fit_model(grid[result.best_index], train);
  result.model.set_cv_accuracy(result.table[result.best_index].mean_accuracy);
  if (options.observer) {
    std::vector<std::size_t> all(train.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    options.observer(result.best_index, -1, all, result.model.standardizer());
  }
  return result;
}

}  // namespace droidsynth::models
