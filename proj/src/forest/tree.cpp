#include <algorithm>
#include <cmath>
#include <numeric>

#include "cascade/common/error.hpp"
#include "cascade/forest/forest.hpp"
#include "tree_internal.hpp"

namespace cascade {
namespace {

LabelClass argmax_class(const ClassVector& v) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (v[c] > v[best]) best = c;
  }
  return static_cast<LabelClass>(best);
}

struct SplitCandidate {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& X, std::span<const LabelClass> y,
              std::span<const double> w, const ForestConfig& config, Rng& rng)
      : X_(X), y_(y), w_(w), config_(config), rng_(rng) {
    const int m = static_cast<int>(X.cols);
    mtry_ = config.features_per_split > 0
                ? std::min(config.features_per_split, m)
                : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
    feature_order_.resize(X.cols);
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    scratch_.reserve(rows_.size());
    grow(0, rows_.size(), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    ClassVector counts{};
    for (std::size_t i = begin; i < end; ++i) {
      counts[to_index(y_[rows_[i]])] += w_[rows_[i]];
    }
    {
      TreeNode& node = tree_.nodes[id];
      node.class_counts = counts;
      const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
      for (int c = 0; c < kNumClasses; ++c) {
        node.probability[c] = total > 0.0 ? counts[c] / total : 1.0 / kNumClasses;
      }
      node.prediction = argmax_class(counts);
    }

    const int classes_present = static_cast<int>(
        std::count_if(counts.begin(), counts.end(), [](double v) { return v > 0.0; }));
    const std::size_t n = end - begin;
    if (depth >= config_.max_depth || classes_present <= 1 ||
        n < 2 * static_cast<std::size_t>(std::max(config_.min_samples_leaf, 1))) {
      return id;
    }

    const SplitCandidate split = find_split(begin, end, counts);
    if (!split.valid) return id;

    const auto mid_it = std::partition(
        rows_.begin() + static_cast<std::ptrdiff_t>(begin),
        rows_.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return X_.at(r, split.feature) <= split.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());

    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  SplitCandidate find_split(std::size_t begin, std::size_t end, const ClassVector& parent) {
    const double parent_w = std::accumulate(parent.begin(), parent.end(), 0.0);
    double parent_score = 0.0;
    for (double v : parent) parent_score += v * v;
    parent_score /= parent_w;
    const double eps = 1e-12 * parent_w;
    const auto min_leaf = static_cast<std::size_t>(std::max(config_.min_samples_leaf, 1));

    std::iota(feature_order_.begin(), feature_order_.end(), 0);
    std::shuffle(feature_order_.begin(), feature_order_.end(), rng_);

    SplitCandidate best;
    int evaluated = 0;
    for (std::size_t k = 0; k < feature_order_.size() && evaluated < mtry_; ++k) {
      const int f = feature_order_[k];
      scratch_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        scratch_.emplace_back(X_.at(rows_[i], f), rows_[i]);
      }
      std::sort(scratch_.begin(), scratch_.end());
      if (scratch_.front().first == scratch_.back().first) continue;  // constant here
      ++evaluated;

      ClassVector left{};
      double left_w = 0.0;
      const std::size_t n = scratch_.size();
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t r = scratch_[i].second;
        const double wr = w_[r];
        left[to_index(y_[r])] += wr;
        left_w += wr;
        const double a = scratch_[i].first;
        const double b = scratch_[i + 1].first;
        if (a == b) continue;
        if (i + 1 < min_leaf || n - i - 1 < min_leaf) continue;
        const double right_w = parent_w - left_w;
        if (left_w <= 0.0 || right_w <= 0.0) continue;
        double ls = 0.0, rs = 0.0;
        for (int c = 0; c < kNumClasses; ++c) {
          ls += left[c] * left[c];
          const double rc = parent[c] - left[c];
          rs += rc * rc;
        }
        const double gain = ls / left_w + rs / right_w - parent_score;
        double threshold = 0.5 * (a + b);
        if (!(threshold < b)) threshold = a;
        const bool better =
            !best.valid || gain > best.gain + eps ||
            (gain >= best.gain - eps &&
             (f < best.feature || (f == best.feature && threshold < best.threshold)));
        if (better) best = {true, f, threshold, gain};
      }
    }
    return best;
  }

  const FeatureMatrix& X_;
  std::span<const LabelClass> y_;
  std::span<const double> w_;
  const ForestConfig& config_;
  Rng& rng_;
  int mtry_ = 1;
  std::vector<int> feature_order_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, std::size_t>> scratch_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree fit_tree_on_rows(const FeatureMatrix& X, std::span<const LabelClass> y,
                              std::span<const double> sample_weights, const ForestConfig& config,
                              Rng& rng, std::vector<std::size_t> rows) {
  TreeBuilder builder(X, y, sample_weights, config, rng);
  return builder.build(std::move(rows));
}

DecisionTree fit_tree(const FeatureMatrix& X, std::span<const LabelClass> y,
                      std::span<const double> sample_weights, const ForestConfig& config,
                      Rng& rng) {
  if (X.rows < 2) throw InvalidArgument("fit_tree needs at least 2 samples");
  if (y.size() != X.rows || sample_weights.size() != X.rows) {
    throw DimensionError("fit_tree: X, y and weights disagree on sample count");
  }
  if (config.max_depth < 0) throw InvalidArgument("max_depth must be >= 0");
  std::vector<std::size_t> rows(X.rows);
  std::iota(rows.begin(), rows.end(), 0);
  return fit_tree_on_rows(X, y, sample_weights, config, rng, std::move(rows));
}

int DecisionTree::leaf_index(std::span<const double> x) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    const auto& n = nodes[id];
    id = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return id;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  return nodes[leaf_index(x)];
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) {
      deepest = std::max(deepest, d[i]);
      continue;
    }
    d[n.left] = d[i] + 1;
    d[n.right] = d[i] + 1;
  }
  return deepest;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

}  // namespace cascade
