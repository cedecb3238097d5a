#include <algorithm>
#include <fstream>

#include "cascade/common/binary_io.hpp"
#include "cascade/common/error.hpp"
#include "cascade/forest/forest.hpp"
#include "tree_internal.hpp"

namespace cascade {

using nlohmann::json;

ClassVector compute_class_weights(std::span<const LabelClass> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (LabelClass l : labels) ++counts[to_index(l)];
  ClassVector w{};
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0) {
      throw InvalidArgument("class " + std::string(label_name(static_cast<LabelClass>(c))) +
                            " is absent; balanced weights undefined");
    }
    w[c] = static_cast<double>(labels.size()) / (kNumClasses * static_cast<double>(counts[c]));
  }
  return w;
}

std::vector<std::size_t> bootstrap_sample(std::size_t n_rows, std::uint64_t seed,
                                          std::size_t tree_index) {
  Rng rng = make_rng(seed, 0xb007ULL << 32 | tree_index);
  std::uniform_int_distribution<std::size_t> pick(0, n_rows - 1);
  std::vector<std::size_t> rows(n_rows);
  for (auto& r : rows) r = pick(rng);
  return rows;
}

Forest fit_forest(const FeatureMatrix& X, std::span<const LabelClass> y,
                  const ForestConfig& config) {
  if (X.rows < 2) throw InvalidArgument("fit_forest needs at least 2 samples");
  if (y.size() != X.rows) throw DimensionError("fit_forest: X and y disagree on sample count");
  if (config.n_trees < 1) throw InvalidArgument("n_trees must be >= 1");

  Forest forest;
  forest.config = config;
  forest.n_features = X.cols;
  forest.class_weights = compute_class_weights(y);
  std::vector<double> weights(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) weights[i] = forest.class_weights[to_index(y[i])];

  forest.trees.reserve(static_cast<std::size_t>(config.n_trees));
  for (int b = 0; b < config.n_trees; ++b) {
    // Every tree owns its rng stream, so trees may be fitted in any order.
    Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(b));
    std::vector<std::size_t> rows;
    if (config.bootstrap) {
      rows = bootstrap_sample(X.rows, config.seed, static_cast<std::size_t>(b));
    } else {
      rows.resize(X.rows);
      for (std::size_t i = 0; i < X.rows; ++i) rows[i] = i;
    }
    forest.trees.push_back(fit_tree_on_rows(X, y, weights, config, rng, std::move(rows)));
  }
  return forest;
}

LabelClass plurality_vote(std::span<const LabelClass> votes) {
  std::array<int, kNumClasses> counts{};
  for (LabelClass v : votes) ++counts[to_index(v)];
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<LabelClass>(best);
}

LabelClass Forest::predict(std::span<const double> x) const {
  if (x.size() != n_features) throw DimensionError("predict: feature count mismatch");
  std::array<int, kNumClasses> counts{};
  for (const auto& t : trees) ++counts[to_index(t.leaf_for(x).prediction)];
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<LabelClass>(best);
}

ClassVector Forest::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features) throw DimensionError("predict_proba: feature count mismatch");
  ClassVector p{};
  for (const auto& t : trees) {
    const auto& leaf = t.leaf_for(x);
    for (int c = 0; c < kNumClasses; ++c) p[c] += leaf.probability[c];
  }
  for (double& v : p) v /= static_cast<double>(trees.size());
  return p;
}

std::vector<LabelClass> Forest::predict(const FeatureMatrix& X) const {
  std::vector<LabelClass> out;
  out.reserve(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) out.push_back(predict(X.row(i)));
  return out;
}

std::vector<ClassVector> Forest::predict_proba(const FeatureMatrix& X) const {
  std::vector<ClassVector> out;
  out.reserve(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) out.push_back(predict_proba(X.row(i)));
  return out;
}

namespace {

json node_to_json(const DecisionTree& tree, int id) {
  const auto& n = tree.nodes[id];
  if (n.is_leaf()) {
    return json{{"counts", n.class_counts},
                {"probability", n.probability},
                {"prediction", to_index(n.prediction)}};
  }
  return json{{"feature", n.feature},
              {"threshold", n.threshold},
              {"counts", n.class_counts},
              {"probability", n.probability},
              {"prediction", to_index(n.prediction)},
              {"left", node_to_json(tree, n.left)},
              {"right", node_to_json(tree, n.right)}};
}

int node_from_json(const json& j, DecisionTree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode n;
  j.at("counts").get_to(n.class_counts);
  j.at("probability").get_to(n.probability);
  n.prediction = label_from_index(j.at("prediction").get<int>());
  if (j.contains("feature")) {
    n.feature = j.at("feature").get<int>();
    n.threshold = j.at("threshold").get<double>();
    n.left = node_from_json(j.at("left"), tree);
    n.right = node_from_json(j.at("right"), tree);
  }
  tree.nodes[id] = n;
  return id;
}

}  // namespace

json forest_to_json(const Forest& forest) {
  json trees = json::array();
  for (const auto& t : forest.trees) trees.push_back(node_to_json(t, 0));
  const auto& c = forest.config;
  return json{{"format_version", 1},
              {"n_features", forest.n_features},
              {"class_weights", forest.class_weights},
              {"config",
               {{"n_trees", c.n_trees},
                {"max_depth", c.max_depth},
                {"min_samples_leaf", c.min_samples_leaf},
                {"features_per_split", c.features_per_split},
                {"bootstrap", c.bootstrap},
                {"seed", c.seed}}},
              {"trees", trees}};
}

Forest forest_from_json(const json& j) {
  try {
    if (j.value("format_version", -1) != 1) throw VersionError("unsupported forest format version");
    Forest f;
    f.n_features = j.at("n_features").get<std::size_t>();
    j.at("class_weights").get_to(f.class_weights);
    const auto& c = j.at("config");
    f.config.n_trees = c.at("n_trees").get<int>();
    f.config.max_depth = c.at("max_depth").get<int>();
    f.config.min_samples_leaf = c.at("min_samples_leaf").get<int>();
    f.config.features_per_split = c.at("features_per_split").get<int>();
    f.config.bootstrap = c.at("bootstrap").get<bool>();
    f.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trees")) {
      DecisionTree tree;
      node_from_json(t, tree);
      for (const auto& n : tree.nodes) {
        if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= f.n_features) {
          throw DimensionError("forest node references feature beyond n_features");
        }
      }
      f.trees.push_back(std::move(tree));
    }
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("forest json: ") + e.what(), 0);
  }
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  io::write_text(path, forest_to_json(forest).dump() + "\n");
}

Forest load_forest(const std::filesystem::path& path) {
  try {
    return forest_from_json(json::parse(io::read_text(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("forest json: ") + e.what(), e.byte);
  }
}

}  // namespace cascade
