#pragma once

#include <vector>

#include "droidsynth/models/classifier.hpp"

namespace droidsynth::models {

/// Fully connected network: ReLU hidden layers, one sigmoid output unit,
/// binary cross-entropy loss, mini-batch Adam (beta1 0.9, beta2 0.999,
/// eps 1e-8). Weights start He-normal from the classifier seed, biases at zero, and
/// rows are reshuffled every epoch from the same seed stream.
class MlpClassifier final : public Classifier {
 public:
  explicit MlpClassifier(MlpParams params = {}, std::uint64_t seed = 0)
      : params_(std::move(params)), seed_(seed) {}

  void fit(MatrixView x, std::span<const int> y) override;
  std::vector<double> predict_proba(MatrixView x) const override;
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  // Builds the layer shapes for `inputs` features and draws initial weights.
  void initialize(std::size_t inputs);

  // All weights and biases, layer by layer (W row-major, then b).
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  // Mean cross-entropy over the rows and its gradient w.r.t. parameters().
  double loss_and_gradient(MatrixView x, std::span<const int> y,
                           std::vector<double>* gradient) const;

 private:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out
  };

  MlpParams params_;
  std::uint64_t seed_;
  std::vector<Layer> layers_;
};

}  // namespace droidsynth::models
