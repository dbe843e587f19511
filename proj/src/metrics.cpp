#include "droidsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "droidsynth/error.hpp"
#include "droidsynth/rng.hpp"

namespace droidsynth {

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("confusion: " + std::to_string(y_true.size()) + " labels vs " +
                    std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
      throw DataError("confusion: non-binary value at row " + std::to_string(i));
    }
    if (t == 1) {
      p == 1 ? ++cm.tp : ++cm.fn;
    } else {
      p == 1 ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

BasicMetrics basic_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("basic_metrics: empty confusion matrix");
  BasicMetrics m;
  auto ratio = [&](std::uint64_t num, std::uint64_t den, const char* name) {
    if (den == 0) {
      m.undefined.insert(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy");
  m.precision = ratio(cm.tp, cm.tp + cm.fp, "precision");
  m.recall = ratio(cm.tp, cm.tp + cm.fn, "recall");
  m.fpr = ratio(cm.fp, cm.fp + cm.tn, "fpr");
  if (m.precision + m.recall == 0.0) {
    m.undefined.insert("f1");
    m.f1 = 0.0;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> y_true) {
  if (scores.size() != y_true.size()) throw DataError("roc_auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Rank sum of positives with tied scores sharing their average rank.
  double positive_rank_sum = 0.0;
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (y_true[order[k]] == 1) {
        positive_rank_sum += avg_rank;
        ++pos;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) {
    throw DataError("roc_auc: undefined with a single class present");
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

namespace {

// Linear interpolation between order statistics at position q * (n - 1).
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Interval bootstrap_ci(std::span<const int> y_true, std::span<const int> y_pred, int resamples,
                      std::uint64_t seed, double level) {
  if (y_true.size() != y_pred.size()) throw DataError("bootstrap_ci: length mismatch");
  if (y_true.empty()) throw DataError("bootstrap_ci: no rows");
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) {
    throw UsageError("bootstrap_ci: resamples >= 1 and 0 < level < 1 required");
  }
  const std::size_t n = y_true.size();
  std::vector<char> hit(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hit[i] = y_true[i] == y_pred[i];
    hits += hit[i];
  }
  const double observed = static_cast<double>(hits) / static_cast<double>(n);

  Rng rng(seed);
  std::vector<double> accs(static_cast<std::size_t>(resamples));
  for (auto& a : accs) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += hit[rng.below(n)];
    a = static_cast<double>(c) / static_cast<double>(n);
  }
  std::sort(accs.begin(), accs.end());
  const double tail = (1.0 - level) / 2.0;
  Interval ci{percentile(accs, tail), percentile(accs, 1.0 - tail)};
  ci.low = std::min(ci.low, observed);
  ci.high = std::max(ci.high, observed);
  return ci;
}

nlohmann::json MetricSet::to_json() const {
  return {
      {"accuracy", accuracy},
      {"roc_auc", roc_auc},
      {"precision", precision},
      {"recall", recall},
      {"f1", f1},
      {"fpr", fpr},
      {"ci_low", ci_low},
      {"ci_high", ci_high},
      {"confusion", {{"tp", confusion.tp}, {"tn", confusion.tn}, {"fp", confusion.fp}, {"fn", confusion.fn}}},
      {"undefined", undefined},
  };
}

MetricSet evaluate_predictions(std::span<const int> y_true, std::span<const int> y_pred,
                               std::span<const double> scores, std::uint64_t seed,
                               int resamples) {
  MetricSet m;
  m.confusion = confusion(y_true, y_pred);
  const auto basic = basic_metrics(m.confusion);
  m.accuracy = basic.accuracy;
  m.precision = basic.precision;
  m.recall = basic.recall;
  m.f1 = basic.f1;
  m.fpr = basic.fpr;
  m.undefined = basic.undefined;
  try {
    m.roc_auc = roc_auc(scores, y_true);
  } catch (const DataError&) {
    m.roc_auc = 0.0;
    m.undefined.insert("roc_auc");
  }
  const auto ci = bootstrap_ci(y_true, y_pred, resamples, seed);
  m.ci_low = ci.low;
  m.ci_high = ci.high;
  return m;
}

}  // namespace droidsynth
