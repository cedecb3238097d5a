#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "cascade/common/rng.hpp"
#include "cascade/core/types.hpp"
#include "cascade/features/features.hpp"

namespace cascade {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 15;
  int min_samples_leaf = 1;
  // 0 selects ceil(sqrt(n_features)).
  int features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 42;

  bool operator==(const ForestConfig&) const = default;
};

// Flat node storage; children are indices into DecisionTree::nodes.
// Values <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  ClassVector class_counts{};  // weighted
  ClassVector probability{};
  LabelClass prediction = LabelClass::Normal;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> x) const;
  int leaf_index(std::span<const double> x) const;
  int depth() const;
  std::size_t leaf_count() const;

  bool operator==(const DecisionTree&) const = default;
};

struct Forest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  ClassVector class_weights{1.0, 1.0, 1.0, 1.0};
  ForestConfig config;

  // Plurality vote over trees; ties go to the lower class index.
  LabelClass predict(std::span<const double> x) const;
  // Mean of per-tree leaf probability vectors.
  ClassVector predict_proba(std::span<const double> x) const;

  std::vector<LabelClass> predict(const FeatureMatrix& X) const;
  std::vector<ClassVector> predict_proba(const FeatureMatrix& X) const;

  bool operator==(const Forest&) const = default;
};

// weight_c = n_total / (4 * n_c). Throws if a class is absent.
ClassVector compute_class_weights(std::span<const LabelClass> labels);

// Greedy CART with weighted Gini impurity. Candidate thresholds are midpoints
// between consecutive distinct values. Each node evaluates a uniformly drawn
// subset of features_per_split non-constant features. Equal gains resolve to
// the lowest feature index, then the lowest threshold.
DecisionTree fit_tree(const FeatureMatrix& X, std::span<const LabelClass> y,
                      std::span<const double> sample_weights, const ForestConfig& config,
                      Rng& rng);

// Row indices (with replacement) of the bootstrap resample used for tree
// `tree_index`. Exposed so out-of-bag coverage can be audited.
std::vector<std::size_t> bootstrap_sample(std::size_t n_rows, std::uint64_t seed,
                                          std::size_t tree_index);

// B trees on bootstrap resamples, weighted by balanced class weights.
Forest fit_forest(const FeatureMatrix& X, std::span<const LabelClass> y,
                  const ForestConfig& config = {});

LabelClass plurality_vote(std::span<const LabelClass> votes);

nlohmann::json forest_to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& j);
void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace cascade
