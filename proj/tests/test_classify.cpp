#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nowcast/classify.hpp"
#include "nowcast/error.hpp"
#include "nowcast/rng.hpp"

using namespace nowcast;
using regression::Matrix;

namespace {

// one informative feature cleanly separating three classes, plus noise
struct SeparableSet {
  Matrix x;
  std::vector<uint8_t> labels;

  SeparableSet(std::size_t n, std::size_t noise_features, uint64_t seed) {
    rng::Xoshiro256ss gen(seed);
    x = Matrix(n, 1 + noise_features);
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const uint8_t cls = uint8_t(i % 3);
      labels[i] = cls;
      x.at(i, 0) = double(cls) * 10.0 + gen.uniform(0.0, 4.0);
      for (std::size_t f = 0; f < noise_features; ++f)
        x.at(i, 1 + f) = gen.normal(0.0, 1.0);
    }
  }
};

}  // namespace

TEST_CASE("tertile labels form rank-based thirds") {
  SUBCASE("1..9 split exactly") {
    std::vector<double> values = {9, 1, 8, 2, 7, 3, 6, 4, 5};
    const auto labeling = classify::tertile_labels(values);
    // values 1,2,3 → low; 4,5,6 → medium; 7,8,9 → high
    std::vector<int> counts(3, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      ++counts[labeling.labels[i]];
      if (values[i] <= 3) CHECK(labeling.labels[i] == 0);
      if (values[i] >= 7) CHECK(labeling.labels[i] == 2);
    }
    CHECK(counts == std::vector<int>{3, 3, 3});
    CHECK_FALSE(labeling.degenerate_warning);
  }
  SUBCASE("n = 10 follows the floor rule with sizes {3, 3, 4}") {
    std::vector<double> values(10);
    std::iota(values.begin(), values.end(), 0.0);
    const auto labeling = classify::tertile_labels(values);
    std::vector<int> counts(3, 0);
    for (const uint8_t l : labeling.labels) ++counts[l];
    CHECK(counts == std::vector<int>{3, 3, 4});
  }
  SUBCASE("a constant column still labels by rank and warns") {
    std::vector<double> values(9, 4.2);
    const auto labeling = classify::tertile_labels(values);
    std::vector<int> counts(3, 0);
    for (const uint8_t l : labeling.labels) ++counts[l];
    CHECK(counts == std::vector<int>{3, 3, 3});
    CHECK(labeling.degenerate_warning);
  }
  SUBCASE("fewer than three values is an error") {
    CHECK_THROWS_AS(classify::tertile_labels(std::vector<double>{1.0, 2.0}), ValidationError);
  }
}

TEST_CASE("gini impurity base cases") {
  const std::vector<uint32_t> pure = {12, 0, 0};
  CHECK(classify::gini_impurity(pure) == 0.0);
  const std::vector<uint32_t> even2 = {6, 6, 0};
  CHECK(classify::gini_impurity(even2) == doctest::Approx(0.5).epsilon(1e-12));
  const std::vector<uint32_t> even3 = {5, 5, 5};
  CHECK(classify::gini_impurity(even3) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  rng::Xoshiro256ss gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<uint32_t> counts = {uint32_t(gen.bounded(50)), uint32_t(gen.bounded(50)),
                                          uint32_t(gen.bounded(50))};
    const double g = classify::gini_impurity(counts);
    CHECK(g >= 0.0);
    CHECK(g <= 2.0 / 3.0 + 1e-12);
  }
}

TEST_CASE("a separable informative feature dominates the forest") {
  const SeparableSet data(600, 3, 17);
  classify::ForestConfig config;
  config.trees = 60;
  config.seed = 5;
  const auto model = classify::train_forest(data.x, data.labels, config);

  const SeparableSet holdout(300, 3, 18);
  const auto report = classify::evaluate(model, holdout.x, holdout.labels);
  CHECK(report.accuracy >= 0.9);

  const auto top = std::max_element(model.mean_decrease_gini.begin(),
                                    model.mean_decrease_gini.end());
  CHECK(top == model.mean_decrease_gini.begin());
}

TEST_CASE("importances satisfy the per-tree accounting identity") {
  const SeparableSet data(300, 2, 29);
  classify::ForestConfig config;
  config.trees = 40;
  config.seed = 2;
  const auto model = classify::train_forest(data.x, data.labels, config);
  const double total = std::accumulate(model.mean_decrease_gini.begin(),
                                       model.mean_decrease_gini.end(), 0.0);
  CHECK(std::fabs(total - model.mean_total_decrease) < 1e-9);
  for (const double v : model.mean_decrease_gini) CHECK(v >= 0.0);
}

TEST_CASE("training is deterministic per seed and worker count") {
  const SeparableSet data(240, 2, 7);
  classify::ForestConfig config;
  config.trees = 30;
  config.seed = 91;
  config.workers = 1;
  const auto a = classify::train_forest(data.x, data.labels, config);
  config.workers = 4;
  const auto b = classify::train_forest(data.x, data.labels, config);
  REQUIRE(a.mean_decrease_gini.size() == b.mean_decrease_gini.size());
  for (std::size_t f = 0; f < a.mean_decrease_gini.size(); ++f)
    CHECK(a.mean_decrease_gini[f] == b.mean_decrease_gini[f]);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(classify::predict(a, data.x.row(i)) == classify::predict(b, data.x.row(i)));
  }
}

TEST_CASE("single-class training sets are rejected") {
  Matrix x(10, 2);
  std::vector<uint8_t> labels(10, 1);
  CHECK_THROWS_AS(classify::train_forest(x, labels, {}), ValidationError);
}

TEST_CASE("evaluation metrics follow the confusion-matrix definitions") {
  // hand-built single-leaf tree: a constant "low" predictor
  classify::ForestModel model;
  model.feature_count = 1;
  classify::Tree tree;
  classify::TreeNode leaf;
  leaf.counts = {5, 2, 1};
  tree.nodes.push_back(leaf);
  model.trees.push_back(tree);
  model.mean_decrease_gini = {0.0};

  Matrix x(9, 1);
  std::vector<uint8_t> labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  const auto report = classify::evaluate(model, x, labels);
  CHECK(report.accuracy == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(report.recall[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.recall[1] == 0.0);
  CHECK(report.precision[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(report.confusion[0][0] == 3);
  CHECK(report.confusion[1][0] == 3);
}

TEST_CASE("prediction ties break to the lexicographically smallest class name") {
  // leaf counts tied between low(0) and high(2): "high" < "low"
  classify::ForestModel model;
  model.feature_count = 1;
  classify::Tree tree;
  classify::TreeNode leaf;
  leaf.counts = {4, 0, 4};
  tree.nodes.push_back(leaf);
  model.trees.push_back(tree);

  std::vector<double> row = {0.0};
  CHECK(classify::predict(model, row) == 2);  // "high"

  classify::ForestModel model2;
  model2.feature_count = 1;
  classify::Tree tree2;
  classify::TreeNode leaf2;
  leaf2.counts = {4, 4, 0};  // low vs medium: "low" < "medium"
  tree2.nodes.push_back(leaf2);
  model2.trees.push_back(tree2);
  CHECK(classify::predict(model2, row) == 0);  // "low"
}

TEST_CASE("shuffled labels collapse accuracy to chance") {
  SeparableSet data(900, 3, 41);
  rng::Xoshiro256ss gen(57);
  gen.shuffle(data.labels);

  const auto split = classify::split_rows(data.labels.size(), 0.6, 7);
  const Matrix x_train = data.x.select_rows(split.train);
  const Matrix x_test = data.x.select_rows(split.test);
  std::vector<uint8_t> y_train, y_test;
  for (const std::size_t r : split.train) y_train.push_back(data.labels[r]);
  for (const std::size_t r : split.test) y_test.push_back(data.labels[r]);

  classify::ForestConfig config;
  config.trees = 60;
  config.seed = 3;
  const auto model = classify::train_forest(x_train, y_train, config);
  const auto report = classify::evaluate(model, x_test, y_test);
  CHECK(report.accuracy > 1.0 / 3.0 - 0.05);
  CHECK(report.accuracy < 1.0 / 3.0 + 0.05);
}

TEST_CASE("train/test splits have the configured sizes and partition the rows") {
  const auto split = classify::split_rows(100, 0.6, 5);
  CHECK(split.train.size() == 60);
  CHECK(split.test.size() == 40);
  std::vector<uint8_t> seen(100, 0);
  for (const std::size_t r : split.train) seen[r] = 1;
  for (const std::size_t r : split.test) {
    CHECK(seen[r] == 0);
    seen[r] = 1;
  }
  for (const uint8_t s : seen) CHECK(s == 1);
}
