#include "droidsynth/models/standardizer.hpp"

#include <cmath>

#include "droidsynth/error.hpp"
#include "serial.hpp"

namespace droidsynth::models {

Standardizer Standardizer::fit(MatrixView train) {
  if (train.rows == 0) throw DataError("standardizer: cannot fit on an empty matrix");
  Standardizer s;
  s.fitted_on_ = train.rows;
  s.means_.assign(train.cols, 0.0);
  s.stdevs_.assign(train.cols, 0.0);
  const double n = static_cast<double>(train.rows);
  for (std::size_t r = 0; r < train.rows; ++r) {
    for (std::size_t c = 0; c < train.cols; ++c) s.means_[c] += train.at(r, c);
  }
  for (auto& m : s.means_) m /= n;
  // Two-pass variance.
  for (std::size_t r = 0; r < train.rows; ++r) {
    for (std::size_t c = 0; c < train.cols; ++c) {
      const double d = train.at(r, c) - s.means_[c];
      s.stdevs_[c] += d * d;
    }
  }
  for (auto& v : s.stdevs_) v = std::sqrt(v / n);
  return s;
}

std::vector<double> Standardizer::transform(MatrixView x) const {
  if (x.cols != means_.size()) {
    throw DataError("standardizer: expected " + std::to_string(means_.size()) + " features, got " +
                    std::to_string(x.cols));
  }
  std::vector<double> out(x.rows * x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      out[r * x.cols + c] = stdevs_[c] > 0.0 ? (x.at(r, c) - means_[c]) / stdevs_[c] : 0.0;
    }
  }
  return out;
}

void Standardizer::save(std::ostream& out) const {
  out << "standardizer population " << fitted_on_ << '\n';
  serial::write_vector(out, "means", means_);
  serial::write_vector(out, "stdevs", stdevs_);
}

Standardizer Standardizer::load(std::istream& in) {
  serial::expect(in, "standardizer");
  serial::expect(in, "population");
  Standardizer s;
  s.fitted_on_ = serial::read<std::size_t>(in);
  s.means_ = serial::read_vector(in, "means");
  s.stdevs_ = serial::read_vector(in, "stdevs");
  if (s.means_.size() != s.stdevs_.size()) throw DataError("model file: standardizer size mismatch");
  return s;
}

}  // namespace droidsynth::models
