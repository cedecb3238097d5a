#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "cascade/common/error.hpp"
#include "cascade/forest/forest.hpp"

namespace cascade {
namespace {

FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  FeatureMatrix m(rows, cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : m.values) v = n(rng);
  return m;
}

// Labels from the first two features so trees have something to learn.
std::vector<LabelClass> quadrant_labels(const FeatureMatrix& X) {
  std::vector<LabelClass> y;
  for (std::size_t i = 0; i < X.rows; ++i)
    y.push_back(label_from_index((X.at(i, 0) > 0 ? 1 : 0) + (X.at(i, 1) > 0 ? 2 : 0)));
  return y;
}

TEST(ClassWeights, Balanced) {
  std::vector<LabelClass> y;
  const int counts[4] = {368, 275, 276, 81};
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < counts[c]; ++k) y.push_back(label_from_index(c));
  auto w = compute_class_weights(y);
  EXPECT_NEAR(w[0], 0.679, 1e-3);
  EXPECT_NEAR(w[1], 0.909, 1e-3);
  EXPECT_NEAR(w[2], 0.906, 1e-3);
  EXPECT_NEAR(w[3], 3.086, 1e-3);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(w[c] * counts[c], 250.0, 1e-9);
  auto doubled = y;
  doubled.insert(doubled.end(), y.begin(), y.end());
  EXPECT_EQ(compute_class_weights(doubled), w);
  std::vector<LabelClass> even;
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < 25; ++k) even.push_back(label_from_index(c));
  for (double v : compute_class_weights(even)) EXPECT_DOUBLE_EQ(v, 1.0);
  std::vector<LabelClass> missing{LabelClass::Normal, LabelClass::Caution};
  EXPECT_THROW(compute_class_weights(missing), InvalidArgument);
}

ForestConfig all_features(int depth) {
  ForestConfig c;
  c.n_trees = 1;
  c.max_depth = depth;
  c.features_per_split = 2;
  c.bootstrap = false;
  return c;
}

TEST(Tree, SeparableOneFeature) {
  FeatureMatrix X(6, 1);
  X.values = {0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
  std::vector<LabelClass> y{LabelClass::Normal, LabelClass::Normal, LabelClass::Normal,
                            LabelClass::Danger, LabelClass::Danger, LabelClass::Danger};
  std::vector<double> w(6, 1.0);
  ForestConfig c = all_features(5);
  c.features_per_split = 1;
  Rng rng(0);
  auto tree = fit_tree(X, y, w, c, rng);
  EXPECT_EQ(tree.depth(), 1);
  EXPECT_GT(tree.nodes[0].threshold, 0.3);
  EXPECT_LE(tree.nodes[0].threshold, 0.7);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(tree.leaf_for(X.row(i)).prediction, y[i]);
}

TEST(Tree, SingleClassIsOneLeaf) {
  auto X = random_matrix(10, 3, 1);
  std::vector<LabelClass> y(10, LabelClass::Warning);
  std::vector<double> w(10, 1.0);
  Rng rng(0);
  auto tree = fit_tree(X, y, w, all_features(5), rng);
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_EQ(tree.nodes[0].prediction, LabelClass::Warning);
}

TEST(Tree, ConstantFeaturesGiveOneLeaf) {
  FeatureMatrix X(4, 2);
  std::fill(X.values.begin(), X.values.end(), 1.0);
  std::vector<LabelClass> y{LabelClass::Normal, LabelClass::Caution, LabelClass::Normal, LabelClass::Caution};
  std::vector<double> w(4, 1.0);
  Rng rng(0);
  EXPECT_EQ(fit_tree(X, y, w, all_features(5), rng).nodes.size(), 1u);
}

TEST(Tree, XorNeedsDepthTwo) {
  FeatureMatrix X(4, 2);
  X.values = {0, 0, 0, 1, 1, 0, 1, 1};
  std::vector<LabelClass> y{LabelClass::Normal, LabelClass::Caution, LabelClass::Caution, LabelClass::Normal};
  std::vector<double> w(4, 1.0);
  Rng rng(0);
  auto tree = fit_tree(X, y, w, all_features(2), rng);
  EXPECT_LE(tree.depth(), 2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(tree.leaf_for(X.row(i)).prediction, y[i]);
}

TEST(Tree, LeafProbabilitiesAreDistributions) {
  auto X = random_matrix(200, 5, 2);
  auto f = fit_forest(X, quadrant_labels(X), {20, 6, 2, 0, true, 3});
  for (const auto& t : f.trees) {
    EXPECT_LE(t.depth(), 6);
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) {
        EXPECT_TRUE(std::isfinite(n.threshold));
        EXPECT_LT(n.feature, 5);
        continue;
      }
      double s = 0.0;
      for (double p : n.probability) s += p;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Forest, DeterministicAndSerializable) {
  auto X = random_matrix(150, 6, 3);
  auto y = quadrant_labels(X);
  ForestConfig c;
  c.n_trees = 15;
  auto a = fit_forest(X, y, c);
  auto b = fit_forest(X, y, c);
  EXPECT_EQ(a, b);
  auto path = std::filesystem::temp_directory_path() / "cascade_forest_test.json";
  save_forest(a, path);
  EXPECT_EQ(load_forest(path), a);
  std::filesystem::remove(path);
  EXPECT_EQ(forest_from_json(forest_to_json(a)), a);
}

TEST(Forest, SingleTreeMatchesItsBootstrapSample) {
  auto X = random_matrix(80, 4, 4);
  auto y = quadrant_labels(X);
  ForestConfig c;
  c.n_trees = 1;
  auto f = fit_forest(X, y, c);
  auto rows = bootstrap_sample(80, c.seed, 0);
  auto sub = X.select_rows(rows);
  std::vector<LabelClass> sub_y;
  std::vector<double> sub_w;
  for (auto r : rows) {
    sub_y.push_back(y[r]);
    sub_w.push_back(f.class_weights[to_index(y[r])]);
  }
  Rng rng = make_rng(c.seed, 0);
  EXPECT_EQ(fit_tree(sub, sub_y, sub_w, c, rng), f.trees[0]);
}

TEST(Forest, OutOfBagShareIsAboutOneOverE) {
  const std::size_t n = 1000, trees = 100;
  std::vector<int> in_bag_count(n, 0);
  for (std::size_t t = 0; t < trees; ++t) {
    std::vector<bool> seen(n, false);
    for (auto r : bootstrap_sample(n, 42, t)) seen[r] = true;
    for (std::size_t i = 0; i < n; ++i) in_bag_count[i] += seen[i] ? 1 : 0;
  }
  double oob = 0.0;
  for (int c : in_bag_count) oob += static_cast<double>(trees - c) / trees;
  oob /= n;
  EXPECT_NEAR(oob, std::exp(-1.0), 0.03);
}

TEST(Forest, MonotoneTransformKeepsRouting) {
  auto X = random_matrix(120, 4, 5);
  auto y = quadrant_labels(X);
  FeatureMatrix T = X;
  for (auto& v : T.values) v = std::exp(v) + v * v * v;  // strictly increasing
  ForestConfig c;
  c.n_trees = 10;
  auto a = fit_forest(X, y, c);
  auto b = fit_forest(T, y, c);
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k)
      EXPECT_EQ(a.trees[t].nodes[k].feature, b.trees[t].nodes[k].feature);
    // Midpoint thresholds differ after the transform, so only rows the tree
    // was fitted on are guaranteed to route identically.
    for (std::size_t i : bootstrap_sample(X.rows, c.seed, t))
      EXPECT_EQ(a.trees[t].leaf_index(X.row(i)), b.trees[t].leaf_index(T.row(i)));
  }
}

Forest voting_forest(const std::vector<std::pair<LabelClass, ClassVector>>& leaves) {
  Forest f;
  f.n_features = 1;
  for (const auto& [cls, prob] : leaves) {
    TreeNode leaf;
    leaf.prediction = cls;
    leaf.probability = prob;
    DecisionTree t;
    t.nodes.push_back(leaf);
    f.trees.push_back(t);
  }
  return f;
}

TEST(Forest, VotingRules) {
  std::vector<double> x{0.0};
  auto three = voting_forest({{LabelClass::Normal, {1, 0, 0, 0}},
                              {LabelClass::Normal, {1, 0, 0, 0}},
                              {LabelClass::Danger, {0, 0, 0, 1}}});
  EXPECT_EQ(three.predict(x), LabelClass::Normal);
  auto tie = voting_forest({{LabelClass::Caution, {0, 1, 0, 0}}, {LabelClass::Warning, {0, 0, 1, 0}}});
  EXPECT_EQ(tie.predict(x), LabelClass::Caution);
  // Mode and probability argmax disagree: two narrow Normal votes against a
  // confident Caution leaf.
  auto split = voting_forest({{LabelClass::Normal, {0.51, 0.49, 0, 0}},
                              {LabelClass::Normal, {0.51, 0.49, 0, 0}},
                              {LabelClass::Caution, {0, 1, 0, 0}}});
  EXPECT_EQ(split.predict(x), LabelClass::Normal);
  auto p = split.predict_proba(x);
  EXPECT_GT(p[1], p[0]);
  EXPECT_NEAR(p[0] + p[1] + p[2] + p[3], 1.0, 1e-12);
  std::vector<double> wrong{0.0, 1.0};
  EXPECT_THROW(split.predict(wrong), DimensionError);
}

TEST(Forest, TenThousandRowsUnderThirtySeconds) {
  auto X = random_matrix(10000, 32, 6);
  auto y = quadrant_labels(X);
  const auto t0 = std::chrono::steady_clock::now();
  auto f = fit_forest(X, y, {});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 30.0);
  EXPECT_EQ(f.trees.size(), 100u);
}

}  // namespace
}  // namespace cascade
