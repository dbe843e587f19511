#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "droidsynth/error.hpp"
#include "droidsynth/models/decision_tree.hpp"
#include "droidsynth/models/knn.hpp"
#include "droidsynth/models/logistic_regression.hpp"
#include "droidsynth/models/mlp.hpp"
#include "droidsynth/models/random_forest.hpp"
#include "droidsynth/rng.hpp"
#include "droidsynth/scenarios.hpp"
#include "fixtures.hpp"

using namespace droidsynth;
using namespace droidsynth::models;

namespace {

double train_accuracy(Classifier& model, const FeatureMatrix& m) {
  const auto p = model.predict_proba(MatrixView::of(m));
  std::vector<int> pred(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) pred[i] = label_from_probability(p[i]);
  return accuracy(m.labels(), pred);
}

// Exhaustive neighbour order: every training row sorted by (distance, index).
std::vector<std::size_t> brute_force_neighbors(const FeatureMatrix& train, std::span<const double> q,
                                               std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    double d = 0.0;
    for (std::size_t c = 0; c < train.cols(); ++c) d += (train.at(r, c) - q[c]) * (train.at(r, c) - q[c]);
    all.push_back({d, r});
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
  return out;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

std::pair<FeatureMatrix, FeatureMatrix> holdout(const FeatureMatrix& m, std::uint64_t seed) {
  const auto parts = stratified_split(m.labels(), 0.8, seed);
  return {m.select_rows(parts.part_a), m.select_rows(parts.part_b)};
}

}  // namespace

TEST_SUITE("standardizer") {
  TEST_CASE("two-row example") {
    const std::vector<double> x = {1.0, 3.0};
    const auto s = Standardizer::fit(MatrixView::of(x, 1));
    CHECK(s.means()[0] == 2.0);
    CHECK(s.stdevs()[0] == 1.0);
    CHECK(s.transform(MatrixView::of(x, 1)) == std::vector<double>{-1.0, 1.0});
    CHECK(s.fitted_on() == 2);
  }

  TEST_CASE("constant feature maps to zero") {
    const std::vector<double> x = {5, 1, 5, 2, 5, 3};
    const auto s = Standardizer::fit(MatrixView::of(x, 2));
    const auto z = s.transform(MatrixView::of(x, 2));
    for (std::size_t r = 0; r < 3; ++r) CHECK(z[r * 2] == 0.0);
  }

  TEST_CASE("fit data is centred with unit population variance") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto m = testing::gaussian_blobs(37, 4, 3.0, seed);
      const auto s = Standardizer::fit(MatrixView::of(m));
      const auto z = s.transform(MatrixView::of(m));
      for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) mean += z[r * 4 + c];
        mean /= static_cast<double>(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) var += (z[r * 4 + c] - mean) * (z[r * 4 + c] - mean);
        var /= static_cast<double>(m.rows());
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-6);
        CHECK(s.stdevs()[c] >= 0.0);
      }
    }
  }

  TEST_CASE("empty matrix is rejected") {
    const std::vector<double> none;
    CHECK_THROWS_AS(Standardizer::fit(MatrixView::of(none, 3)), DataError);
  }
}

TEST_SUITE("knn") {
  TEST_CASE("self match with k=1") {
    const auto m = testing::gaussian_blobs(20, 3, 2.0, 1);
    KnnClassifier knn(KnnParams{1});
    knn.fit(MatrixView::of(m), m.labels());
    const auto p = knn.predict_proba(MatrixView::of(m));
    for (std::size_t r = 0; r < m.rows(); ++r) CHECK(p[r] == static_cast<double>(m.labels()[r]));
  }

  TEST_CASE("neighbour vote gives 2/3") {
    // Query at 0: neighbours at 1 (label 1), 2 (label 1), 3 (label 0); 10 is far.
    const std::vector<double> x = {1, 2, 3, 10};
    const std::vector<int> y = {1, 1, 0, 0};
    KnnClassifier knn(KnnParams{3});
    knn.fit(MatrixView::of(x, 1), y);
    const std::vector<double> q = {0.0};
    CHECK(knn.predict_proba(MatrixView::of(q, 1))[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("distance ties at the boundary go to the lower row index") {
    const std::vector<double> x = {-1, 1, 1, -1};  // rows 0..3, all at distance 1 from 0
    const std::vector<int> y = {0, 1, 1, 0};
    KnnClassifier knn(KnnParams{2});
    knn.fit(MatrixView::of(x, 1), y);
    const std::vector<double> q = {0.0};
    CHECK(knn.neighbors(q) == std::vector<std::size_t>{0, 1});
    // One vote each: probability 0.5 predicts class 0.
    CHECK(label_from_probability(knn.predict_proba(MatrixView::of(q, 1))[0]) == 0);
  }

  TEST_CASE("k larger than the training set is an error") {
    const std::vector<double> x = {1, 2};
    const std::vector<int> y = {0, 1};
    KnnClassifier knn(KnnParams{3});
    CHECK_THROWS_AS(knn.fit(MatrixView::of(x, 1), y), DataError);
  }

  TEST_CASE("matches exhaustive distance sort on 200-row fixtures") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      // Integer grid values produce plenty of exact distance ties.
      Rng rng(seed);
      std::vector<double> v(200 * 3);
      for (auto& x : v) x = static_cast<double>(rng.between(0, 4));
      std::vector<int> y(200);
      for (auto& l : y) l = static_cast<int>(rng.below(2));
      const FeatureMatrix train({"a", "b", "c"}, v, y);
      for (std::size_t k : {1, 5, 17}) {
        KnnClassifier knn(KnnParams{static_cast<int>(k)});
        knn.fit(MatrixView::of(train), train.labels());
        for (int q = 0; q < 20; ++q) {
          const std::vector<double> query = {double(rng.between(0, 4)), double(rng.between(0, 4)),
                                             double(rng.between(0, 4))};
          CHECK(knn.neighbors(query) == brute_force_neighbors(train, query, k));
        }
      }
    }
  }
}

TEST_SUITE("decision tree") {
  TEST_CASE("separable single feature needs one split") {
    const std::vector<double> x = {0.1, 0.4, 0.2, 0.9, 0.7, 0.8};
    const std::vector<int> y = {0, 0, 0, 1, 1, 1};
    DecisionTreeClassifier tree;
    tree.fit(MatrixView::of(x, 1), y);
    CHECK(tree.tree().nodes().size() == 3);
    CHECK(tree.tree().nodes()[0].threshold == doctest::Approx(0.55));
    CHECK(train_accuracy(tree, FeatureMatrix({"x"}, x, y)) == 1.0);
  }

  TEST_CASE("pure labels give a single leaf") {
    const std::vector<double> x = {1, 2, 3};
    for (int label : {0, 1}) {
      const std::vector<int> y(3, label);
      DecisionTreeClassifier tree;
      tree.fit(MatrixView::of(x, 1), y);
      REQUIRE(tree.tree().nodes().size() == 1);
      CHECK(tree.tree().nodes()[0].probability == static_cast<double>(label));
    }
  }

  TEST_CASE("unbalanced XOR is solved at depth 2") {
    const auto m = testing::xor_fixture(5, 1);
    DecisionTreeClassifier tree(TreeParams{2, 1});
    tree.fit(MatrixView::of(m), m.labels());
    CHECK(tree.tree().depth() == 2);
    CHECK(train_accuracy(tree, m) == 1.0);
  }

  TEST_CASE("balanced XOR stops at the root on zero gain") {
    const auto m = testing::xor_fixture(5);
    DecisionTreeClassifier tree;
    tree.fit(MatrixView::of(m), m.labels());
    CHECK(tree.tree().nodes().size() == 1);
  }

  TEST_CASE("max_depth and min_leaf bound the tree") {
    const auto m = testing::gaussian_blobs(200, 3, 0.5, 3);
    DecisionTreeClassifier shallow(TreeParams{3, 1});
    shallow.fit(MatrixView::of(m), m.labels());
    CHECK(shallow.tree().depth() <= 3);
    DecisionTreeClassifier leafy(TreeParams{std::nullopt, 10});
    leafy.fit(MatrixView::of(m), m.labels());
    // Route every training row; each leaf must hold at least min_leaf rows.
    const auto& nodes = leafy.tree().nodes();
    std::map<int, int> per_leaf;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      int id = 0;
      while (nodes[std::size_t(id)].feature >= 0) {
        const auto& n = nodes[std::size_t(id)];
        id = m.at(r, std::size_t(n.feature)) <= n.threshold ? n.left : n.right;
      }
      ++per_leaf[id];
    }
    CHECK(per_leaf.size() > 1);
    for (const auto& [leaf, count] : per_leaf) CHECK(count >= 10);
  }
}

TEST_SUITE("logistic regression") {
  TEST_CASE("zero weights give probability one half") {
    LogisticRegression lr;
    lr.set_parameters({0.0, 0.0, 0.0}, 0.0);
    const std::vector<double> x = {1, -2, 3, 40, 5, -6};
    for (double p : lr.predict_proba(MatrixView::of(x, 3))) CHECK(p == 0.5);
  }

  TEST_CASE("separable blobs with weak regularisation") {
    const auto m = testing::gaussian_blobs(400, 5, 3.0, 9);
    LogisticRegression lr(LogRegParams{1e-4, 1000, 1e-6});
    lr.fit(MatrixView::of(m), m.labels());
    CHECK(train_accuracy(lr, m) >= 0.99);
  }

  TEST_CASE("analytic gradient matches central differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const std::size_t n = 12, d = 4;
      std::vector<double> x(n * d);
      for (auto& v : x) v = rng.normal();
      std::vector<int> y(n);
      for (auto& l : y) l = static_cast<int>(rng.below(2));
      std::vector<double> theta(d + 1);
      for (auto& t : theta) t = rng.normal();
      const double l2 = 0.3;
      std::vector<double> grad;
      LogisticRegression::loss_and_gradient(MatrixView::of(x, d), y, theta, l2, &grad);
      const double h = 1e-6;
      for (std::size_t j = 0; j <= d; ++j) {
        auto plus = theta, minus = theta;
        plus[j] += h;
        minus[j] -= h;
        const double fd = (LogisticRegression::loss_and_gradient(MatrixView::of(x, d), y, plus, l2, nullptr) -
                           LogisticRegression::loss_and_gradient(MatrixView::of(x, d), y, minus, l2, nullptr)) /
                          (2 * h);
        CHECK(relative_error(grad[j], fd) < 1e-5);
      }
    }
  }

  TEST_CASE("bias is not penalised") {
    const std::vector<double> x = {0.0, 0.0};
    const std::vector<int> y = {1, 1};
    std::vector<double> grad;
    // With x = 0 only the bias matters; its gradient has no l2 term.
    LogisticRegression::loss_and_gradient(MatrixView::of(x, 1), y, std::vector<double>{0.0, 2.0}, 10.0, &grad);
    CHECK(grad[1] == doctest::Approx(1.0 / (1.0 + std::exp(2.0)) * -1.0));
  }

  TEST_CASE("non-finite input surfaces as an error") {
    const std::vector<double> x = {1e308, -1e308};
    const std::vector<int> y = {0, 1};
    LogisticRegression lr;
    CHECK_THROWS_AS(lr.fit(MatrixView::of(x, 1), y), DataError);
  }
}

TEST_SUITE("mlp") {
  TEST_CASE("backprop matches central differences on a 4x3x1 net") {
    Rng rng(5);
    std::vector<double> x(8 * 4);
    for (auto& v : x) v = rng.normal();
    const std::vector<int> y = {0, 1, 1, 0, 1, 0, 0, 1};
    MlpParams params;
    params.hidden = {3};
    MlpClassifier net(params, 17);
    net.initialize(4);
    auto theta = net.parameters();
    REQUIRE(theta.size() == 3 * 4 + 3 + 3 + 1);
    for (auto& t : theta) t = rng.normal();  // generic point; avoids dead units
    net.set_parameters(theta);
    std::vector<double> grad;
    net.loss_and_gradient(MatrixView::of(x, 4), y, &grad);
    const double h = 1e-6;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      auto t = theta;
      t[j] = theta[j] + h;
      net.set_parameters(t);
      const double up = net.loss_and_gradient(MatrixView::of(x, 4), y, nullptr);
      t[j] = theta[j] - h;
      net.set_parameters(t);
      const double down = net.loss_and_gradient(MatrixView::of(x, 4), y, nullptr);
      INFO("parameter " << j);
      CHECK(relative_error(grad[j], (up - down) / (2 * h)) < 1e-4);
    }
  }

  TEST_CASE("same seed gives identical weights") {
    const auto m = testing::gaussian_blobs(64, 3, 2.0, 4);
    MlpParams params;
    params.hidden = {8};
    params.epochs = 5;
    MlpClassifier a(params, 99), b(params, 99), c(params, 100);
    a.fit(MatrixView::of(m), m.labels());
    b.fit(MatrixView::of(m), m.labels());
    c.fit(MatrixView::of(m), m.labels());
    CHECK(a.parameters() == b.parameters());
    CHECK(a.parameters() != c.parameters());
  }

  TEST_CASE("solves XOR with 8 hidden units") {
    const auto m = testing::xor_fixture(8);
    MlpParams params;
    params.hidden = {8};
    params.learning_rate = 0.05;
    params.batch_size = 8;
    params.epochs = 400;
    bool solved = false;
    for (std::uint64_t seed : {1, 2, 3}) {
      MlpClassifier net(params, seed);
      net.fit(MatrixView::of(m), m.labels());
      if (train_accuracy(net, m) == 1.0) {
        solved = true;
        break;
      }
    }
    CHECK(solved);
  }

  TEST_CASE("save and load round trip") {
    const auto m = testing::gaussian_blobs(40, 3, 2.0, 4);
    MlpParams params;
    params.hidden = {4, 3};
    params.epochs = 3;
    MlpClassifier a(params, 1);
    a.fit(MatrixView::of(m), m.labels());
    std::stringstream buf;
    a.save(buf);
    MlpClassifier b(params, 0);
    b.load(buf);
    CHECK(a.predict_proba(MatrixView::of(m)) == b.predict_proba(MatrixView::of(m)));
  }
}

TEST_SUITE("random forest") {
  TEST_CASE("one tree without bootstrap equals the single tree") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto m = testing::gaussian_blobs(150, 4, 1.0, seed);
      ForestParams fp;
      fp.n_trees = 1;
      fp.bootstrap = false;
      fp.max_features = 4;
      RandomForest forest(fp, seed);
      forest.fit(MatrixView::of(m), m.labels());
      DecisionTreeClassifier tree;
      tree.fit(MatrixView::of(m), m.labels());
      CHECK(forest.predict_proba(MatrixView::of(m)) == tree.predict_proba(MatrixView::of(m)));
    }
  }

  TEST_CASE("fixed seed gives identical predictions") {
    const auto m = testing::gaussian_blobs(120, 6, 1.0, 2);
    ForestParams fp;
    fp.n_trees = 10;
    RandomForest a(fp, 5), b(fp, 5);
    a.fit(MatrixView::of(m), m.labels());
    b.fit(MatrixView::of(m), m.labels());
    CHECK(a.predict_proba(MatrixView::of(m)) == b.predict_proba(MatrixView::of(m)));
  }

  TEST_CASE("forest beats the average single tree on noisy blobs") {
    double forest_total = 0.0, tree_total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto [train, test] = holdout(testing::gaussian_blobs(300, 8, 0.8, 100 + seed), seed);
      ForestParams fp;
      fp.n_trees = 50;
      RandomForest forest(fp, seed);
      forest.fit(MatrixView::of(train), train.labels());
      DecisionTreeClassifier tree;
      tree.fit(MatrixView::of(train), train.labels());
      forest_total += train_accuracy(forest, test);
      tree_total += train_accuracy(tree, test);
    }
    CHECK(forest_total >= tree_total);
  }
}

TEST_SUITE("pipeline model") {
  TEST_CASE("every classifier clears 0.95 on separated blobs") {
    const auto [train, test] = holdout(testing::gaussian_blobs(1000, 10, 4.0, 2024), 1);
    for (auto kind : kAllClassifiers) {
      const auto model = fit_model(ClassifierSpec::defaults(kind, 3), train);
      const double acc = accuracy(test.labels(), model.predict(test));
      INFO(to_string(kind) << " accuracy " << acc);
      CHECK(acc >= 0.95);
      for (double p : model.predict_proba(test)) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(std::abs(p + (1.0 - p) - 1.0) < 1e-9);
      }
    }
  }

  TEST_CASE("trained models round-trip through save/load") {
    const auto [train, test] = holdout(testing::gaussian_blobs(200, 4, 1.5, 8), 2);
    for (auto kind : kAllClassifiers) {
      auto spec = ClassifierSpec::defaults(kind, 4);
      if (kind == ClassifierKind::mlp) std::get<MlpParams>(spec.params).epochs = 5;
      if (kind == ClassifierKind::rforest) std::get<ForestParams>(spec.params).n_trees = 5;
      auto model = fit_model(spec, train);
      model.set_cv_accuracy(0.875);
      std::stringstream buf;
      model.save(buf);
      const auto loaded = TrainedModel::load(buf);
      INFO(to_string(kind));
      CHECK(loaded.spec().describe() == spec.describe());
      CHECK(loaded.cv_accuracy() == 0.875);
      CHECK(loaded.predict_proba(test) == model.predict_proba(test));
    }
  }

  TEST_CASE("determinism: same data, parameters and seed give the same predictions") {
    const auto [train, test] = holdout(testing::gaussian_blobs(200, 4, 1.0, 8), 2);
    for (auto kind : kAllClassifiers) {
      auto spec = ClassifierSpec::defaults(kind, 11);
      if (kind == ClassifierKind::mlp) std::get<MlpParams>(spec.params).epochs = 5;
      if (kind == ClassifierKind::rforest) std::get<ForestParams>(spec.params).n_trees = 5;
      CHECK(fit_model(spec, train).predict_proba(test) == fit_model(spec, train).predict_proba(test));
    }
  }

  TEST_CASE("classifier parameter parsing and validation") {
    const auto spec = ClassifierSpec::parse(ClassifierKind::rforest, "n_trees=7;max_depth=none;bootstrap=0");
    CHECK(spec.describe() == "n_trees=7;max_depth=none;min_leaf=1;bootstrap=0;max_features=auto");
    CHECK(ClassifierSpec::parse(ClassifierKind::mlp, "hidden=16x8").describe() ==
          "hidden=16x8;lr=0.001;batch=32;epochs=200");
    CHECK_THROWS_AS(ClassifierSpec::parse(ClassifierKind::knn, "k=0"), UsageError);
    CHECK_THROWS_AS(ClassifierSpec::parse(ClassifierKind::knn, "depth=3"), UsageError);
    CHECK_THROWS_AS(classifier_from_string("svm"), UsageError);
    ClassifierSpec mismatched{ClassifierKind::knn, TreeParams{}, 0};
    CHECK_THROWS_AS(mismatched.check(), UsageError);
  }
}
