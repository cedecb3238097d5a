#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cascade/common/error.hpp"
#include "cascade/treeshap/treeshap.hpp"

namespace cascade {
namespace {

FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < cols; ++j) names.push_back("f" + std::to_string(j) + "_mean");
  FeatureMatrix m(rows, cols, names);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : m.values) v = n(rng);
  return m;
}

std::vector<LabelClass> random_labels(const FeatureMatrix& X, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> noise(0, 3);
  std::vector<LabelClass> y;
  for (std::size_t i = 0; i < X.rows; ++i) {
    int c = (X.at(i, 0) > 0 ? 1 : 0) + (X.at(i, X.cols - 1) > 0.3 ? 2 : 0);
    if (noise(rng) == 0) c = noise(rng);
    y.push_back(label_from_index(c));
  }
  // Every class must be present for the class weights.
  for (int c = 0; c < kNumClasses; ++c) y[static_cast<std::size_t>(c)] = label_from_index(c);
  return y;
}

TreeNode leaf(double p1) {
  TreeNode n;
  n.probability = {1.0 - p1, p1, 0.0, 0.0};
  n.prediction = p1 > 0.5 ? LabelClass::Caution : LabelClass::Normal;
  return n;
}

TreeNode split(int feature, double threshold, int left, int right) {
  TreeNode n;
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return n;
}

Forest one_tree(std::vector<TreeNode> nodes, std::size_t n_features) {
  Forest f;
  DecisionTree t;
  t.nodes = std::move(nodes);
  f.trees.push_back(t);
  f.n_features = n_features;
  return f;
}

FeatureMatrix rows_of(std::vector<std::vector<double>> rows) {
  FeatureMatrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
  for (std::size_t j = 0; j < m.cols; ++j) m.names.push_back("x" + std::to_string(j) + "_mean");
  return m;
}

TEST(BruteForce, SingleLeafHasNoAttribution) {
  auto f = one_tree({leaf(0.3)}, 3);
  auto bg = rows_of({{0, 0, 0}, {1, 2, 3}});
  std::vector<double> x{5, 5, 5};
  auto r = explain_exact_bruteforce(f, x, bg);
  EXPECT_NEAR(r.base_value[1], 0.3, 1e-15);
  for (const auto& p : r.phi)
    for (double v : p) EXPECT_EQ(v, 0.0);
}

TEST(BruteForce, DepthOneTreeCreditsItsFeature) {
  auto f = one_tree({split(1, 0.5, 1, 2), leaf(0.2), leaf(0.9)}, 3);
  auto bg = rows_of({{0, 0, 0}, {0, 1, 0}, {0, 0, 0}, {0, 0, 1}});
  std::vector<double> x{1, 1, 1};
  auto r = explain_exact_bruteforce(f, x, bg);
  // base = 0.75 * 0.2 + 0.25 * 0.9; phi_1 = 0.9 - base.
  const double base = 0.75 * 0.2 + 0.25 * 0.9;
  EXPECT_NEAR(r.base_value[1], base, 1e-12);
  EXPECT_NEAR(r.phi[1][1], 0.9 - base, 1e-12);
  EXPECT_EQ(r.phi[0][1], 0.0);
  EXPECT_EQ(r.phi[2][1], 0.0);
}

Forest additive_tree() {
  // p1 = (x0 > 0.5) / 2 + (x1 > 0.5) / 2
  return one_tree({split(0, 0.5, 1, 4), split(1, 0.5, 2, 3), leaf(0.0), leaf(0.5),
                   split(1, 0.5, 5, 6), leaf(0.5), leaf(1.0)},
                  2);
}

TEST(Axioms, SymmetryOnAdditiveModel) {
  auto f = additive_tree();
  auto bg = rows_of({{0, 0}});
  std::vector<double> x{1, 1};
  for (auto explain : {explain_exact_bruteforce, explain_treeshap}) {
    auto r = explain(f, x, bg);
    EXPECT_NEAR(r.phi[0][1], 0.5, 1e-12);
    EXPECT_NEAR(r.phi[1][1], 0.5, 1e-12);
    EXPECT_NEAR(r.phi[0][1], r.phi[1][1], 1e-9);
  }
}

TEST(Axioms, DummyFeatureGetsExactlyZero) {
  std::mt19937_64 rng(1);
  auto X = random_matrix(200, 6, rng);
  // Feature 3 is constant, so no tree can split on it.
  for (std::size_t i = 0; i < X.rows; ++i) X.at(i, 3) = 1.0;
  ForestConfig c;
  c.n_trees = 5;
  c.max_depth = 4;
  auto f = fit_forest(X, random_labels(X, rng), c);
  auto bg = sample_background(X, 20, 3);
  for (std::size_t k = 0; k < 5; ++k) {
    auto row = X.row(k);
    auto r = explain_treeshap(f, std::vector<double>(row.begin(), row.end()), bg);
    for (double v : r.phi[3]) EXPECT_EQ(v, 0.0);
  }
}

TEST(Axioms, BackgroundEqualToInputGivesZero) {
  std::mt19937_64 rng(2);
  auto X = random_matrix(100, 5, rng);
  ForestConfig c;
  c.n_trees = 5;
  auto f = fit_forest(X, random_labels(X, rng), c);
  auto row = X.row(7);
  std::vector<double> x(row.begin(), row.end());
  FeatureMatrix bg(3, 5, X.names);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) bg.at(i, j) = x[j];
  auto r = explain_treeshap(f, x, bg);
  for (const auto& p : r.phi)
    for (double v : p) EXPECT_EQ(v, 0.0);
}

TEST(Oracle, TreeShapMatchesBruteForceOnRandomForests) {
  std::mt19937_64 rng(3);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
    auto X = random_matrix(120, m, rng);
    ForestConfig c;
    c.n_trees = 5;
    c.max_depth = std::uniform_int_distribution<int>(1, 4)(rng);
    c.seed = trial;
    auto f = fit_forest(X, random_labels(X, rng), c);
    auto bg = sample_background(X, 20, trial);
    auto row = X.row(static_cast<std::size_t>(trial));
    std::vector<double> x(row.begin(), row.end());
    auto fast = explain_treeshap(f, x, bg);
    auto slow = explain_exact_bruteforce(f, x, bg);
    for (std::size_t j = 0; j < m; ++j)
      for (int cls = 0; cls < kNumClasses; ++cls)
        worst = std::max(worst, std::abs(fast.phi[j][cls] - slow.phi[j][cls]));
    for (int cls = 0; cls < kNumClasses; ++cls)
      EXPECT_NEAR(fast.base_value[cls], slow.base_value[cls], 1e-12);
  }
  EXPECT_LT(worst, 1e-9);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
}

TEST(Oracle, LocalAccuracyAndAdditivityOverTrees) {
  std::mt19937_64 rng(4);
  auto X = random_matrix(300, 32, rng);
  ForestConfig c;
  c.n_trees = 8;
  auto f = fit_forest(X, random_labels(X, rng), c);
  auto bg = sample_background(X, 30, 1);
  for (std::size_t k = 0; k < 10; ++k) {
    auto row = X.row(k);
    std::vector<double> x(row.begin(), row.end());
    auto r = explain_treeshap(f, x, bg);
    auto p = f.predict_proba(x);
    for (int cls = 0; cls < kNumClasses; ++cls) EXPECT_NEAR(r.reconstructed(cls), p[cls], 1e-9);
    if (k == 0) {
      std::vector<ClassVector> mean(32, ClassVector{});
      for (const auto& t : f.trees) {
        Forest single = f;
        single.trees = {t};
        auto rt = explain_treeshap(single, x, bg);
        for (std::size_t j = 0; j < 32; ++j)
          for (int cls = 0; cls < kNumClasses; ++cls) mean[j][cls] += rt.phi[j][cls] / f.trees.size();
      }
      for (std::size_t j = 0; j < 32; ++j)
        for (int cls = 0; cls < kNumClasses; ++cls) EXPECT_NEAR(mean[j][cls], r.phi[j][cls], 1e-12);
    }
  }
}

TEST(Oracle, BruteForceRefusesWideInputs) {
  std::mt19937_64 rng(5);
  auto X = random_matrix(50, 17, rng);
  ForestConfig c;
  c.n_trees = 2;
  auto f = fit_forest(X, random_labels(X, rng), c);
  auto row = X.row(0);
  EXPECT_THROW(explain_exact_bruteforce(f, std::vector<double>(row.begin(), row.end()), X),
               InvalidArgument);
  std::vector<double> short_x(3, 0.0);
  EXPECT_THROW(explain_treeshap(f, short_x, X), DimensionError);
}

AttributionReport manual_report() {
  AttributionReport r;
  r.feature_names = {"a_mean", "a_std", "a_min", "a_max", "b_mean", "b_std", "b_min", "b_max"};
  r.phi.assign(8, ClassVector{});
  r.phi[0] = {0.1, 0.1, 0.1, 0.1};
  r.phi[1] = {-0.2, -0.2, -0.2, -0.2};
  r.phi[4] = {0.05, 0.0, 0.0, 0.0};
  return r;
}

TEST(Aggregate, SumOfFourAbsoluteValues) {
  auto r = manual_report();
  std::vector<std::string> channels{"a", "b"};
  auto ranking = aggregate_by_sensor(r, channels);
  ASSERT_EQ(ranking.size(), 2u);
  EXPECT_EQ(ranking[0].channel, "a");
  EXPECT_NEAR(ranking[0].importance, 0.3, 1e-12);
  EXPECT_NEAR(ranking[1].importance, 0.0125, 1e-12);
  auto single = aggregate_by_sensor(r, channels, SensorAggregation::SingleClass, 0);
  EXPECT_NEAR(single[1].importance, 0.05, 1e-12);
  std::vector<std::string> swapped{"b", "a"};
  auto again = aggregate_by_sensor(r, swapped);
  EXPECT_EQ(again[0].channel, "a");
  EXPECT_EQ(again[0].importance, ranking[0].importance);
}

TEST(Aggregate, ZeroAndErrors) {
  auto r = manual_report();
  for (auto& p : r.phi) p = {};
  std::vector<std::string> channels{"a", "b"};
  for (const auto& s : aggregate_by_sensor(r, channels)) EXPECT_EQ(s.importance, 0.0);
  r.feature_names[2] = "a_median";
  EXPECT_THROW(aggregate_by_sensor(r, channels), InvalidArgument);
}

TEST(Export, CsvAndJson) {
  auto r = manual_report();
  std::vector<std::string> channels{"a", "b"};
  std::ostringstream out;
  write_attribution_csv(out, r);
  EXPECT_EQ(out.str().rfind("feature,class,phi\n", 0), 0u);
  auto ranking = aggregate_by_sensor(r, channels);
  auto j = attribution_summary_json(r, ranking);
  EXPECT_FALSE(j.dump().empty());
}

TEST(Background, SampledWithoutReplacement) {
  std::mt19937_64 rng(6);
  auto X = random_matrix(40, 2, rng);
  auto bg = sample_background(X, 25, 9);
  EXPECT_EQ(bg.rows, 25u);
  std::set<double> firsts;
  for (std::size_t i = 0; i < bg.rows; ++i) firsts.insert(bg.at(i, 0));
  EXPECT_EQ(firsts.size(), 25u);
  EXPECT_EQ(sample_background(X, 25, 9).values, bg.values);
}

}  // namespace
}  // namespace cascade
