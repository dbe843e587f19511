#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "droidsynth/dataset_prep.hpp"

namespace droidsynth::models {

// Non-owning row-major view.
struct MatrixView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t i) const { return {data + i * cols, cols}; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  static MatrixView of(const FeatureMatrix& m) { return {m.values().data(), m.rows(), m.cols()}; }
  static MatrixView of(const std::vector<double>& values, std::size_t cols) {
    return {values.data(), cols ? values.size() / cols : 0, cols};
  }
};

// Per-feature z-scoring with the population (1/n) standard deviation.
// Zero-variance features map to 0.
class Standardizer {
 public:
  // Throws DataError on an empty matrix.
  static Standardizer fit(MatrixView train);

  std::vector<double> transform(MatrixView x) const;

  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& stdevs() const { return stdevs_; }
  std::size_t fitted_on() const { return fitted_on_; }

  void save(std::ostream& out) const;
  static Standardizer load(std::istream& in);

 private:
  std::vector<double> means_;
  std::vector<double> stdevs_;
  std::size_t fitted_on_ = 0;
};

}  // namespace droidsynth::models
