#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nowcast/regression.hpp"

namespace nowcast::classify {

constexpr int kNumClasses = 3;
/// Class names in label order (0=low, 1=medium, 2=high). Prediction ties
/// break to the lexicographically smallest name.
extern const std::array<std::string, kNumClasses> kClassNames;

struct TertileLabeling {
  double break_low = 0.0;   // value at the first rank boundary
  double break_high = 0.0;  // value at the second rank boundary
  std::vector<uint8_t> labels;
  bool degenerate_warning = false;  // all values equal
};

/// Rank-based thirds: breaks at ranks ⌊n/3⌋ and ⌊2n/3⌋, so classes stay
/// equal-populated even under ties (labels assigned by rank, not value).
TertileLabeling tertile_labels(std::span<const double> values);

struct ForestConfig {
  int trees = 200;
  int features_per_split = 0;  // 0 → floor(sqrt(p))
  int min_leaf = 1;
  uint64_t seed = 0;
  int workers = 1;
};

struct TreeNode {
  int32_t feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int32_t left = -1;
  int32_t right = -1;
  std::array<uint32_t, kNumClasses> counts{};  // training samples in the node
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<double> mean_decrease_gini;  // per feature, averaged over trees
  double mean_total_decrease = 0.0;        // accounting check target
  ForestConfig config;
  std::size_t feature_count = 0;
};

/// Gini impurity 1 - Σ p².
double gini_impurity(std::span<const uint32_t> class_counts);

/// Bootstrap-bagged CART forest; splits maximize the Gini decrease over a
/// random feature subset, thresholds at midpoints between distinct sorted
/// values. Per-tree seeds derive from the master seed by tree index, so
/// training is deterministic for any worker count.
ForestModel train_forest(const regression::Matrix& x, std::span<const uint8_t> labels,
                         const ForestConfig& config);

uint8_t predict(const ForestModel& model, std::span<const double> row);

struct ClassReport {
  std::array<std::array<uint32_t, kNumClasses>, kNumClasses> confusion{};  // [actual][predicted]
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> precision{};
  double accuracy = 0.0;
};

ClassReport evaluate(const ForestModel& model, const regression::Matrix& x_test,
                     std::span<const uint8_t> labels_test);

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

TrainTestSplit split_rows(std::size_t n, double train_fraction, uint64_t seed);

}  // namespace nowcast::classify
