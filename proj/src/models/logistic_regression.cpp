#include "droidsynth/models/logistic_regression.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <istream>
#include <ostream>

#include "droidsynth/error.hpp"
#include "serial.hpp"

namespace droidsynth::models {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double LogisticRegression::loss_and_gradient(MatrixView x, std::span<const int> y,
                                             std::span<const double> theta, double l2_strength,
                                             std::vector<double>* gradient) {
  const std::size_t d = x.cols;
  ConstMap X(x.data, static_cast<Eigen::Index>(x.rows), static_cast<Eigen::Index>(d));
  Eigen::Map<const Eigen::VectorXd> w(theta.data(), static_cast<Eigen::Index>(d));
  const double b = theta[d];
  const Eigen::VectorXd z = (X * w).array() + b;
  const double n = static_cast<double>(x.rows);

  double loss = 0.0;
  Eigen::VectorXd residual(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += softplus(z[i]) - y[static_cast<std::size_t>(i)] * z[i];
    residual[i] = sigmoid(z[i]) - y[static_cast<std::size_t>(i)];
  }
  loss = loss / n + 0.5 * l2_strength * w.squaredNorm();
  if (gradient) {
    gradient->resize(d + 1);
    Eigen::Map<Eigen::VectorXd> g(gradient->data(), static_cast<Eigen::Index>(d));
    g = X.transpose() * residual / n + l2_strength * w;
    (*gradient)[d] = residual.sum() / n;
  }
  return loss;
}

void LogisticRegression::fit(MatrixView x, std::span<const int> y) {
  if (x.rows != y.size()) throw DataError("logreg: row/label count mismatch");
  if (x.rows == 0) throw DataError("logreg: no training rows");
  const std::size_t d = x.cols;
  std::vector<double> theta(d + 1, 0.0), grad, trial(d + 1);
  double loss = loss_and_gradient(x, y, theta, params_.l2_strength, &grad);
  double step = 1.0;
  iterations_ = 0;
  for (int it = 0; it < params_.max_iters; ++it) {
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (std::sqrt(gnorm2) < params_.tol) break;
    step = std::min(step * 2.0, 1e6);
    double trial_loss = 0.0;
    for (int halvings = 0;; ++halvings) {
      for (std::size_t j = 0; j <= d; ++j) trial[j] = theta[j] - step * grad[j];
      trial_loss = loss_and_gradient(x, y, trial, params_.l2_strength, nullptr);
      if (std::isfinite(trial_loss) && trial_loss <= loss - 1e-4 * step * gnorm2) break;
      step *= 0.5;
      if (halvings > 60) break;  // step underflow; accept and let tol/max_iters stop
    }
    if (!std::isfinite(trial_loss)) {
      throw DataError("logreg: non-finite loss at iteration " + std::to_string(it));
    }
    theta.swap(trial);
    loss = loss_and_gradient(x, y, theta, params_.l2_strength, &grad);
    iterations_ = it + 1;
  }
  if (!std::isfinite(loss)) throw DataError("logreg: non-finite loss");
  weights_.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  bias_ = theta[d];
}

std::vector<double> LogisticRegression::predict_proba(MatrixView x) const {
  if (x.cols != weights_.size()) throw DataError("logreg: feature count mismatch");
  std::vector<double> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double z = bias_;
    auto row = x.row(r);
    for (std::size_t c = 0; c < x.cols; ++c) z += weights_[c] * row[c];
    out[r] = sigmoid(z);
  }
  return out;
}

void LogisticRegression::save(std::ostream& out) const {
  out << "logreg " << serial::fmt(bias_) << '\n';
  serial::write_vector(out, "weights", weights_);
}

void LogisticRegression::load(std::istream& in) {
  serial::expect(in, "logreg");
  bias_ = serial::read<double>(in);
  weights_ = serial::read_vector(in, "weights");
}

}  // namespace droidsynth::models
