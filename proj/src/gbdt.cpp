#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "combiner_detail.hpp"
#include "empdis/error.hpp"

namespace empdis {

double GbtTree::predict(const Eigen::VectorXd& row) const {
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const GbtNode& n = nodes[static_cast<std::size_t>(at)];
    at = row[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

}  // namespace empdis

namespace empdis::detail {

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};

// Exact greedy split: scan every feature, every boundary between distinct
// sorted values. Ties keep the first (feature, threshold) encountered so
// fits are order-deterministic.
SplitChoice best_split(const Eigen::MatrixXd& features,
                       const std::vector<double>& residual,
                       const std::vector<std::size_t>& node,
                       std::size_t min_leaf) {
  SplitChoice choice;
  const std::size_t n = node.size();
  if (n < 2 * min_leaf) return choice;

  double total = 0.0;
  for (std::size_t i : node) total += residual[i];

  std::vector<std::size_t> order(n);
  for (int f = 0; f < features.cols(); ++f) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = features(static_cast<Eigen::Index>(node[a]), f);
      const double vb = features(static_cast<Eigen::Index>(node[b]), f);
      if (va != vb) return va < vb;
      return node[a] < node[b];
    });

    double left_sum = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      left_sum += residual[node[order[k]]];
      const double vk = features(static_cast<Eigen::Index>(node[order[k]]), f);
      const double vnext =
          features(static_cast<Eigen::Index>(node[order[k + 1]]), f);
      if (vk == vnext) continue;
      const std::size_t n_left = k + 1;
      const std::size_t n_right = n - n_left;
      if (n_left < min_leaf || n_right < min_leaf) continue;

      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                          right_sum * right_sum / static_cast<double>(n_right) -
                          total * total / static_cast<double>(n);
      if (gain > choice.gain + 1e-12) {
        choice.found = true;
        choice.feature = f;
        choice.threshold = 0.5 * (vk + vnext);
        choice.gain = gain;
        choice.left.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_left));
        choice.right.assign(order.begin() + static_cast<std::ptrdiff_t>(n_left), order.end());
        for (auto& idx : choice.left) idx = node[idx];
        for (auto& idx : choice.right) idx = node[idx];
      }
    }
  }
  return choice;
}

int build_node(GbtTree& tree, const Eigen::MatrixXd& features,
               const std::vector<double>& residual,
               const std::vector<std::size_t>& node, int depth, int max_depth,
               std::size_t min_leaf) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  double mean = 0.0;
  for (std::size_t i : node) mean += residual[i];
  mean /= static_cast<double>(node.size());

  if (depth >= max_depth) {
    tree.nodes[static_cast<std::size_t>(index)].value = mean;
    return index;
  }
  SplitChoice choice = best_split(features, residual, node, min_leaf);
  if (!choice.found) {
    tree.nodes[static_cast<std::size_t>(index)].value = mean;
    return index;
  }

  const int left = build_node(tree, features, residual, choice.left, depth + 1,
                              max_depth, min_leaf);
  const int right = build_node(tree, features, residual, choice.right,
                               depth + 1, max_depth, min_leaf);
  GbtNode& n = tree.nodes[static_cast<std::size_t>(index)];
  n.feature = choice.feature;
  n.threshold = choice.threshold;
  n.left = left;
  n.right = right;
  return index;
}

}  // namespace

GbtState fit_gbt(const Eigen::MatrixXd& features, const std::vector<double>& y,
                 const CombinerKind& kind) {
  const std::size_t n = y.size();
  const int trees = static_cast<int>(kind.hyper_or("trees", 100.0));
  const int max_depth = static_cast<int>(kind.hyper_or("max_depth", 3.0));
  const auto min_leaf =
      static_cast<std::size_t>(kind.hyper_or("min_leaf", 1.0));
  if (trees < 1 || max_depth < 1 || min_leaf < 1) {
    raise(ErrorCode::ConfigInvalid,
          "gradient_boosted_trees hyperparameters must be >= 1");
  }

  GbtState state;
  state.learning_rate = kind.hyper_or("learning_rate", 0.1);

  double base = 0.0;
  for (double v : y) base += v;
  state.base = base / static_cast<double>(n);

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - state.base;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  state.trees.reserve(static_cast<std::size_t>(trees));
  for (int t = 0; t < trees; ++t) {
    GbtTree tree;
    build_node(tree, features, residual, all, 0, max_depth, min_leaf);
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] -= state.learning_rate *
                     tree.predict(features.row(static_cast<Eigen::Index>(i)));
    }
    state.trees.push_back(std::move(tree));
  }
  return state;
}

double gbt_predict(const GbtState& state, const Eigen::VectorXd& row) {
  double value = state.base;
  for (const GbtTree& tree : state.trees) {
    value += state.learning_rate * tree.predict(row);
  }
  return value;
}

}  // namespace empdis::detail
