#include "droidsynth/models/mlp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "droidsynth/error.hpp"
#include "droidsynth/rng.hpp"
#include "serial.hpp"

namespace droidsynth::models {
namespace {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

enum SeedStream : std::uint64_t { kInit = 1, kShuffle = 2 };

}  // namespace

void MlpClassifier::initialize(std::size_t inputs) {
  for (int h : params_.hidden) {
    if (h < 1) throw UsageError("mlp: hidden layer sizes must be >= 1");
  }
  layers_.clear();
  Rng rng(mix_seed(seed_, kInit));
  std::size_t in = inputs;
  auto sizes = params_.hidden;
  sizes.push_back(1);
  for (int out_size : sizes) {
    Layer layer;
    layer.in = in;
    layer.out = static_cast<std::size_t>(out_size);
    layer.weights.resize(layer.in * layer.out);
    const double scale = std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(in, 1)));
    for (auto& w : layer.weights) w = rng.normal() * scale;
    layer.bias.assign(layer.out, 0.0);
    layers_.push_back(std::move(layer));
    in = static_cast<std::size_t>(out_size);
  }
}

std::vector<double> MlpClassifier::parameters() const {
  std::vector<double> flat;
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void MlpClassifier::set_parameters(std::span<const double> flat) {
  std::size_t pos = 0;
  for (auto& l : layers_) {
    if (pos + l.weights.size() + l.bias.size() > flat.size()) {
      throw DataError("mlp: parameter vector too short");
    }
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.weights.size(), l.weights.begin());
    pos += l.weights.size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.begin());
    pos += l.bias.size();
  }
  if (pos != flat.size()) throw DataError("mlp: parameter vector size mismatch");
}

double MlpClassifier::loss_and_gradient(MatrixView x, std::span<const int> y,
                                        std::vector<double>* gradient) const {
  const auto n = static_cast<Eigen::Index>(x.rows);
  // Activations are stored column-per-row: features x batch.
  std::vector<Matrix> acts;
  acts.push_back(Eigen::Map<const RowMatrix>(x.data, n, static_cast<Eigen::Index>(x.cols)).transpose());
  std::vector<Matrix> pre;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    Eigen::Map<const RowMatrix> W(l.weights.data(), static_cast<Eigen::Index>(l.out),
                                  static_cast<Eigen::Index>(l.in));
    Eigen::Map<const Eigen::VectorXd> b(l.bias.data(), static_cast<Eigen::Index>(l.out));
    Matrix z = (W * acts.back()).colwise() + b;
    pre.push_back(z);
    if (li + 1 < layers_.size()) {
      acts.push_back(z.cwiseMax(0.0));
    } else {
      acts.push_back(z);  // logits; the sigmoid is folded into the loss
    }
  }

  const Matrix& logits = acts.back();
  double loss = 0.0;
  Matrix delta(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = logits(0, i);
    const int t = y[static_cast<std::size_t>(i)];
    loss += softplus(z) - t * z;
    delta(0, i) = (sigmoid(z) - t) / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!gradient) return loss;

  std::vector<std::vector<double>> grads(layers_.size());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    RowMatrix gW = delta * acts[li].transpose();
    Eigen::VectorXd gb = delta.rowwise().sum();
    auto& g = grads[li];
    g.assign(gW.data(), gW.data() + gW.size());
    g.insert(g.end(), gb.data(), gb.data() + gb.size());
    if (li > 0) {
      Eigen::Map<const RowMatrix> W(l.weights.data(), static_cast<Eigen::Index>(l.out),
                                    static_cast<Eigen::Index>(l.in));
      Matrix back = W.transpose() * delta;
      delta = back.cwiseProduct((pre[li - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  gradient->clear();
  for (const auto& g : grads) gradient->insert(gradient->end(), g.begin(), g.end());
  return loss;
}

void MlpClassifier::fit(MatrixView x, std::span<const int> y) {
  if (x.rows != y.size()) throw DataError("mlp: row/label count mismatch");
  if (x.rows == 0) throw DataError("mlp: no training rows");
  if (params_.batch_size < 1 || params_.epochs < 0 || !(params_.learning_rate > 0.0)) {
    throw UsageError("mlp: batch_size >= 1, epochs >= 0 and learning_rate > 0 required");
  }
  initialize(x.cols);
  std::vector<double> theta = parameters();
  std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0), grad;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t t = 0;

  Rng rng(mix_seed(seed_, kShuffle));
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(params_.batch_size);
  std::vector<double> bx;
  std::vector<int> by;

  for (int epoch = 0; epoch < params_.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < x.rows; start += batch) {
      const std::size_t end = std::min(start + batch, x.rows);
      bx.clear();
      by.clear();
      for (std::size_t i = start; i < end; ++i) {
        auto row = x.row(order[i]);
        bx.insert(bx.end(), row.begin(), row.end());
        by.push_back(y[order[i]]);
      }
      const double loss = loss_and_gradient(MatrixView::of(bx, x.cols), by, &grad);
      if (!std::isfinite(loss)) {
        throw DataError("mlp: non-finite loss in epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(end - start);
      ++t;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
      for (std::size_t j = 0; j < theta.size(); ++j) {
        m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
        v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
        theta[j] -= params_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
      }
      set_parameters(theta);
    }
    if (!std::isfinite(epoch_loss)) {
      throw DataError("mlp: non-finite loss in epoch " + std::to_string(epoch));
    }
  }
}

std::vector<double> MlpClassifier::predict_proba(MatrixView x) const {
  if (layers_.empty() || x.cols != layers_.front().in) {
    throw DataError("mlp: feature count mismatch");
  }
  const auto n = static_cast<Eigen::Index>(x.rows);
  Matrix a = Eigen::Map<const RowMatrix>(x.data, n, static_cast<Eigen::Index>(x.cols)).transpose();
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    Eigen::Map<const RowMatrix> W(l.weights.data(), static_cast<Eigen::Index>(l.out),
                                  static_cast<Eigen::Index>(l.in));
    Eigen::Map<const Eigen::VectorXd> b(l.bias.data(), static_cast<Eigen::Index>(l.out));
    Matrix z = (W * a).colwise() + b;
    a = li + 1 < layers_.size() ? Matrix(z.cwiseMax(0.0)) : z;
  }
  std::vector<double> out(x.rows);
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = sigmoid(a(0, i));
  return out;
}

void MlpClassifier::save(std::ostream& out) const {
  out << "mlp " << layers_.size() << '\n';
  for (const auto& l : layers_) {
    out << "layer " << l.in << ' ' << l.out << '\n';
    serial::write_vector(out, "W", l.weights);
    serial::write_vector(out, "b", l.bias);
  }
}

void MlpClassifier::load(std::istream& in) {
  serial::expect(in, "mlp");
  layers_.resize(serial::read<std::size_t>(in));
  for (auto& l : layers_) {
    serial::expect(in, "layer");
    l.in = serial::read<std::size_t>(in);
    l.out = serial::read<std::size_t>(in);
    l.weights = serial::read_vector(in, "W");
    l.bias = serial::read_vector(in, "b");
    if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
      throw DataError("model file: mlp layer shape mismatch");
    }
  }
}

}  // namespace droidsynth::models
