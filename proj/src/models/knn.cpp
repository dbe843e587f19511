#include "droidsynth/models/knn.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "droidsynth/error.hpp"
#include "serial.hpp"

namespace droidsynth::models {

void KnnClassifier::fit(MatrixView x, std::span<const int> y) {
  if (x.rows != y.size()) throw DataError("knn: row/label count mismatch");
  if (params_.k < 1) throw UsageError("knn: k must be >= 1");
  if (static_cast<std::size_t>(params_.k) > x.rows) {
    throw DataError("knn: k=" + std::to_string(params_.k) + " exceeds " +
                    std::to_string(x.rows) + " training rows");
  }
  cols_ = x.cols;
  train_.assign(x.data, x.data + x.rows * x.cols);
  labels_.assign(y.begin(), y.end());
}

std::vector<std::size_t> KnnClassifier::neighbors(std::span<const double> query) const {
  const std::size_t n = labels_.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = train_.data() + i * cols_;
    double d = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) {
      const double diff = row[c] - query[c];
      d += diff * diff;
    }
    dist[i] = {d, i};
  }
  const std::size_t k = static_cast<std::size_t>(params_.k);
  // (distance, index) ordering breaks ties toward the lower row index.
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

std::vector<double> KnnClassifier::predict_proba(MatrixView x) const {
  if (x.cols != cols_) throw DataError("knn: feature count mismatch");
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::size_t positives = 0;
    for (std::size_t i : neighbors(x.row(r))) positives += labels_[i] == 1;
    out[r] = static_cast<double>(positives) / params_.k;
  }
  return out;
}

void KnnClassifier::save(std::ostream& out) const {
  out << "knn " << params_.k << ' ' << cols_ << ' ' << labels_.size() << '\n';
  for (int l : labels_) out << l << ' ';
  out << '\n';
  for (double v : train_) out << serial::fmt(v) << ' ';
  out << '\n';
}

void KnnClassifier::load(std::istream& in) {
  serial::expect(in, "knn");
  params_.k = serial::read<int>(in);
  cols_ = serial::read<std::size_t>(in);
  const auto n = serial::read<std::size_t>(in);
  labels_.resize(n);
  for (auto& l : labels_) l = serial::read<int>(in);
  train_.resize(n * cols_);
  for (auto& v : train_) v = serial::read<double>(in);
}

}  // namespace droidsynth::models
