#pragma once

#include <vector>

#include "droidsynth/models/classifier.hpp"

namespace droidsynth::models {

/// L2-regularized logistic regression fitted by gradient descent.
///
/// Objective: mean log-loss + (l2_strength / 2) * ||w||^2, bias unpenalized.
/// Step rule: Armijo backtracking (sufficient decrease c = 1e-4, halving),
/// starting each iteration from twice the previously accepted step. Stops when
/// the gradient norm drops below tol or after max_iters iterations.
class LogisticRegression final : public Classifier {
 public:
  explicit LogisticRegression(LogRegParams params = {}) : params_(params) {}

  void fit(MatrixView x, std::span<const int> y) override;
  std::vector<double> predict_proba(MatrixView x) const override;
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  // Objective and gradient at theta = (w..., bias). Exposed for gradient checks.
  static double loss_and_gradient(MatrixView x, std::span<const int> y,
                                  std::span<const double> theta, double l2_strength,
                                  std::vector<double>* gradient);

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  int iterations() const { return iterations_; }
  void set_parameters(std::vector<double> weights, double bias) {
    weights_ = std::move(weights);
    bias_ = bias;
  }

 private:
  LogRegParams params_;
  std::vector<double> weights_;
  double bias_ = 0.0;
  int iterations_ = 0;
};

}  // namespace droidsynth::models
