#include "nowcast/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nowcast/error.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/rng.hpp"

namespace nowcast::classify {

const std::array<std::string, kNumClasses> kClassNames = {"low", "medium", "high"};

TertileLabeling tertile_labels(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) throw ValidationError("tertile_labels: need at least 3 values");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), (std::size_t)0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  TertileLabeling out;
  out.labels.assign(n, 0);
  const std::size_t b1 = n / 3;
  const std::size_t b2 = 2 * n / 3;
  for (std::size_t rank = 0; rank < n; ++rank) {
    const uint8_t label = rank < b1 ? 0 : (rank < b2 ? 1 : 2);
    out.labels[order[rank]] = label;
  }
  out.break_low = values[order[b1]];
  out.break_high = values[order[b2]];
  if (values[order[0]] == values[order[n - 1]]) {
    out.degenerate_warning = true;
    std::fprintf(stderr, "warning: tertile labeling on a constant column; labels follow rank order\n");
  }
  return out;
}

double gini_impurity(std::span<const uint32_t> class_counts) {
  double total = 0.0;
  for (const uint32_t c : class_counts) total += double(c);
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (const uint32_t c : class_counts) {
    const double p = double(c) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

namespace {

struct TreeBuilder {
  const regression::Matrix& x;
  std::span<const uint8_t> labels;
  const ForestConfig& config;
  int mtry;
  rng::Xoshiro256ss gen;
  Tree tree;
  std::vector<double> decrease_per_feature;  // weighted Gini decreases
  double n_total;

  // scratch
  std::vector<std::size_t> feature_pool;

  TreeBuilder(const regression::Matrix& x_, std::span<const uint8_t> labels_,
              const ForestConfig& config_, int mtry_, uint64_t seed)
      : x(x_), labels(labels_), config(config_), mtry(mtry_), gen(seed),
        decrease_per_feature(x_.cols(), 0.0), n_total(0.0) {
    feature_pool.resize(x.cols());
  }

  int32_t build(std::vector<std::size_t>& rows) {
    const auto node_index = int32_t(tree.nodes.size());
    tree.nodes.emplace_back();
    std::array<uint32_t, kNumClasses> counts{};
    for (const std::size_t r : rows) ++counts[labels[r]];
    tree.nodes[std::size_t(node_index)].counts = counts;

    uint32_t present = 0;
    for (const uint32_t c : counts) present += c > 0 ? 1 : 0;
    if (present <= 1 || rows.size() <= std::size_t(config.min_leaf)) return node_index;

    const double node_impurity = gini_impurity(counts);

    // sample mtry distinct features
    std::iota(feature_pool.begin(), feature_pool.end(), (std::size_t)0);
    const std::size_t pool_n = feature_pool.size();
    const std::size_t draw = std::min<std::size_t>(std::size_t(mtry), pool_n);
    for (std::size_t i = 0; i < draw; ++i) {
      const std::size_t j = i + std::size_t(gen.bounded(uint64_t(pool_n - i)));
      std::swap(feature_pool[i], feature_pool[j]);
    }

    double best_decrease = 0.0;
    int32_t best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, uint8_t>> column(rows.size());
    for (std::size_t f = 0; f < draw; ++f) {
      const std::size_t feature = feature_pool[f];
      for (std::size_t i = 0; i < rows.size(); ++i)
        column[i] = {x.at(rows[i], feature), labels[rows[i]]};
      std::sort(column.begin(), column.end());

      std::array<uint32_t, kNumClasses> left{};
      std::array<uint32_t, kNumClasses> right = counts;
      const double n_node = double(rows.size());
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        ++left[column[i].second];
        --right[column[i].second];
        if (column[i].first == column[i + 1].first) continue;  // no boundary here
        const double n_left = double(i + 1);
        const double n_right = n_node - n_left;
        const double decrease = node_impurity -
                                (n_left / n_node) * gini_impurity(left) -
                                (n_right / n_node) * gini_impurity(right);
        if (decrease > best_decrease + 1e-15) {
          best_decrease = decrease;
          best_feature = int32_t(feature);
          best_threshold = (column[i].first + column[i + 1].first) / 2.0;
        }
      }
    }

    if (best_feature < 0) return node_index;  // nothing separable in the draw

    std::vector<std::size_t> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (const std::size_t r : rows) {
      if (x.at(r, std::size_t(best_feature)) <= best_threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) return node_index;

    // weighted by the node's share of the bootstrap sample
    decrease_per_feature[std::size_t(best_feature)] +=
        (double(rows.size()) / n_total) * best_decrease;

    rows.clear();
    rows.shrink_to_fit();
    const int32_t left_child = build(left_rows);
    const int32_t right_child = build(right_rows);
    TreeNode& node = tree.nodes[std::size_t(node_index)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_child;
    node.right = right_child;
    return node_index;
  }
};

uint8_t tree_vote(const Tree& tree, std::span<const double> row) {
  int32_t node = 0;
  for (;;) {
    const TreeNode& n = tree.nodes[std::size_t(node)];
    if (n.feature < 0) {
      // leaf majority; ties to the lexicographically smallest class name
      uint8_t best = 0;
      for (uint8_t c = 1; c < kNumClasses; ++c) {
        if (n.counts[c] > n.counts[best] ||
            (n.counts[c] == n.counts[best] && kClassNames[c] < kClassNames[best]))
          best = c;
      }
      return best;
    }
    node = row[std::size_t(n.feature)] <= n.threshold ? n.left : n.right;
  }
}

}  // namespace

ForestModel train_forest(const regression::Matrix& x, std::span<const uint8_t> labels,
                         const ForestConfig& config) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (labels.size() != n) throw ValidationError("train_forest: X/label size mismatch");
  if (n < 2 || p < 1) throw ValidationError("train_forest: empty training set");
  if (config.trees < 1) throw ValidationError("train_forest: need at least one tree");

  std::array<uint32_t, kNumClasses> class_counts{};
  for (const uint8_t l : labels) ++class_counts[l];
  uint32_t present = 0;
  for (const uint32_t c : class_counts) present += c > 0 ? 1 : 0;
  if (present < 2) throw ValidationError("train_forest: training labels are a single class");

  const int mtry = config.features_per_split > 0
                       ? config.features_per_split
                       : std::max(1, int(std::floor(std::sqrt(double(p)))));

  ForestModel model;
  model.config = config;
  model.feature_count = p;
  model.trees.resize(std::size_t(config.trees));
  std::vector<std::vector<double>> per_tree_decrease(std::size_t(config.trees));

  par::parallel_chunks(std::size_t(config.trees), 8, config.workers,
                       [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t t = begin; t < end; ++t) {
      TreeBuilder builder(x, labels, config, mtry, rng::derive_seed(config.seed, t));
      // bootstrap sample, same size as the training set
      std::vector<std::size_t> rows(n);
      for (std::size_t i = 0; i < n; ++i) rows[i] = std::size_t(builder.gen.bounded(n));
      builder.n_total = double(n);
      builder.build(rows);
      model.trees[t] = std::move(builder.tree);
      per_tree_decrease[t] = std::move(builder.decrease_per_feature);
    }
  });

  // accumulate importances in tree order for bit-stable results
  model.mean_decrease_gini.assign(p, 0.0);
  double total = 0.0;
  for (const auto& decrease : per_tree_decrease)
    for (std::size_t j = 0; j < p; ++j) {
      model.mean_decrease_gini[j] += decrease[j];
      total += decrease[j];
    }
  for (double& v : model.mean_decrease_gini) v /= double(config.trees);
  model.mean_total_decrease = total / double(config.trees);
  return model;
}

uint8_t predict(const ForestModel& model, std::span<const double> row) {
  std::array<uint32_t, kNumClasses> votes{};
  for (const Tree& tree : model.trees) ++votes[tree_vote(tree, row)];
  uint8_t best = 0;
  for (uint8_t c = 1; c < kNumClasses; ++c) {
    if (votes[c] > votes[best] ||
        (votes[c] == votes[best] && kClassNames[c] < kClassNames[best]))
      best = c;
  }
  return best;
}

ClassReport evaluate(const ForestModel& model, const regression::Matrix& x_test,
                     std::span<const uint8_t> labels_test) {
  if (labels_test.size() != x_test.rows())
    throw ValidationError("evaluate: X/label size mismatch");
  ClassReport report;
  for (std::size_t i = 0; i < x_test.rows(); ++i) {
    const uint8_t predicted = predict(model, x_test.row(i));
    ++report.confusion[labels_test[i]][predicted];
  }
  uint32_t correct = 0, total = 0;
  for (int actual = 0; actual < kNumClasses; ++actual) {
    uint32_t row_sum = 0, col_sum = 0;
    for (int other = 0; other < kNumClasses; ++other) {
      row_sum += report.confusion[actual][other];
      col_sum += report.confusion[other][actual];
      total += report.confusion[actual][other];
    }
    const uint32_t diag = report.confusion[actual][actual];
    report.recall[std::size_t(actual)] = row_sum > 0 ? double(diag) / double(row_sum) : 0.0;
    report.precision[std::size_t(actual)] = col_sum > 0 ? double(diag) / double(col_sum) : 0.0;
    correct += diag;
  }
  report.accuracy = total > 0 ? double(correct) / double(total) : 0.0;
  return report;
}

TrainTestSplit split_rows(std::size_t n, double train_fraction, uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ValidationError("split_rows: train_fraction must be in (0, 1)");
  rng::Xoshiro256ss gen(seed);
  std::vector<uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  gen.shuffle(perm);
  const std::size_t n_train = std::size_t(std::llround(train_fraction * double(n)));
  TrainTestSplit out;
  out.train.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_train));
  out.test.assign(perm.begin() + std::ptrdiff_t(n_train), perm.end());
  return out;
}

}  // namespace nowcast::classify
