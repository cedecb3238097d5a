#include <algorithm>
#include <cmath>
#include <sstream>

#include "cascade/common/error.hpp"
#include "cascade/core/config_json.hpp"
#include "cascade/experiments/experiments.hpp"

namespace cascade::experiments {

using nlohmann::json;

namespace {

constexpr std::pair<ExperimentKind, const char*> kExperimentNames[] = {
    {ExperimentKind::Ablation, "ablation"},
    {ExperimentKind::NoiseSweep, "noise_sweep"},
    {ExperimentKind::LearningCurve, "learning_curve"},
    {ExperimentKind::Corruption, "corruption"},
    {ExperimentKind::Audit, "audit"},
    {ExperimentKind::Localize, "localize"},
    {ExperimentKind::Shap, "shap"},
};

constexpr std::pair<ModelName, const char*> kModelNames[] = {
    {ModelName::Forest, "rf"},
    {ModelName::Sequence, "sequence"},
    {ModelName::Thermal, "thermal"},
    {ModelName::Fusion, "fusion"},
    {ModelName::LateFusion, "late_fusion"},
};

constexpr std::pair<Condition, const char*> kConditionNames[] = {
    {Condition::Clean, "clean"},
    {Condition::ZeroThermal, "zero_thermal"},
    {Condition::ZeroSensor, "zero_sensor"},
};

template <class E, std::size_t N>
std::string name_of(const std::pair<E, const char*> (&table)[N], E value) {
  for (const auto& [v, n] : table) {
    if (v == value) return n;
  }
  throw InvalidArgument("unknown enum value");
}

template <class E, std::size_t N>
E value_of(const std::pair<E, const char*> (&table)[N], const std::string& name,
           const char* what) {
  for (const auto& [v, n] : table) {
    if (name == n) return v;
  }
  throw InvalidArgument(std::string("unknown ") + what + ": " + name);
}

// Short decimal form used inside cell ids ("0.05", "1").
std::string grid_label(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

void check_grid(const std::vector<double>& grid, const char* name, double lo, double hi,
                bool lo_open) {
  if (grid.empty()) throw InvalidArgument(std::string(name) + " is empty");
  if (!std::is_sorted(grid.begin(), grid.end()) ||
      std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw InvalidArgument(std::string(name) + " must be strictly ascending");
  }
  for (double v : grid) {
    if (!std::isfinite(v) || v > hi || v < lo || (lo_open && v == lo)) {
      throw InvalidArgument(std::string(name) + " value out of range");
    }
  }
}

}  // namespace

std::string experiment_name(ExperimentKind kind) { return name_of(kExperimentNames, kind); }
ExperimentKind experiment_from_name(const std::string& name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '-', '_');
  return value_of(kExperimentNames, n, "experiment");
}
std::string model_name(ModelName m) { return name_of(kModelNames, m); }
ModelName model_from_name(const std::string& name) {
  return value_of(kModelNames, name, "model");
}
std::string condition_name(Condition c) { return name_of(kConditionNames, c); }
Condition condition_from_name(const std::string& name) {
  return value_of(kConditionNames, name, "condition");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw InvalidArgument("seeds must be nonempty");
  check_grid(sigma_grid, "sigma_grid", 0.0, 1e6, false);
  check_grid(fractions, "fractions", 0.0, 1.0, true);
  if (learning_curve_seeds < 1) throw InvalidArgument("learning_curve_seeds must be >= 1");
  if (iou_quantile <= 0.0 || iou_quantile >= 1.0) {
    throw InvalidArgument("iou_quantile must lie in (0, 1)");
  }
  if (shap_background < 1 || shap_samples < 1) {
    throw InvalidArgument("shap_background and shap_samples must be >= 1");
  }
  if (train.batch_size < 1 || train.max_epochs < 1) {
    throw InvalidArgument("batch_size and max_epochs must be >= 1");
  }
  if (!dataset_path) generator.validate();
}

void to_json(json& j, const ExperimentConfig& c) {
  json gen;
  cascade::to_json(gen, c.generator);
  j = json{
      {"experiment", experiment_name(c.experiment)},
      {"dataset", c.dataset_path ? json(*c.dataset_path) : json(nullptr)},
      {"generator", gen},
      {"seeds", c.seeds},
      {"output_dir", c.output_dir},
      {"sigma_grid", c.sigma_grid},
      {"fractions", c.fractions},
      {"learning_curve_seeds", c.learning_curve_seeds},
      {"forest",
       {{"n_trees", c.forest.n_trees},
        {"max_depth", c.forest.max_depth},
        {"min_samples_leaf", c.forest.min_samples_leaf},
        {"features_per_split", c.forest.features_per_split},
        {"bootstrap", c.forest.bootstrap}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"cosine_horizon", c.train.cosine_horizon},
        {"lr", c.train.optimizer.lr},
        {"beta1", c.train.optimizer.beta1},
        {"beta2", c.train.optimizer.beta2},
        {"eps", c.train.optimizer.eps},
        {"weight_decay", c.train.optimizer.weight_decay}}},
      {"augment", c.augment},
      {"iou_quantile", c.iou_quantile},
      {"heatmaps_written", c.heatmaps_written},
      {"shap_background", c.shap_background},
      {"shap_samples", c.shap_samples},
      {"audit",
       {{"min_bias", c.audit.bias.min_bias},
        {"alpha", c.audit.bias.alpha},
        {"corruption_asymmetry", c.audit.corruption_asymmetry}}},
  };
}

void from_json(const json& j, ExperimentConfig& c) {
  try {
    if (j.contains("experiment")) c.experiment = experiment_from_name(j.at("experiment"));
    if (j.contains("dataset")) {
      if (j.at("dataset").is_null()) {
        c.dataset_path.reset();
      } else {
        c.dataset_path = j.at("dataset").get<std::string>();
      }
    }
    if (j.contains("generator")) cascade::from_json(j.at("generator"), c.generator);
    if (j.contains("seeds")) j.at("seeds").get_to(c.seeds);
    if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
    if (j.contains("sigma_grid")) j.at("sigma_grid").get_to(c.sigma_grid);
    if (j.contains("fractions")) j.at("fractions").get_to(c.fractions);
    c.learning_curve_seeds = j.value("learning_curve_seeds", c.learning_curve_seeds);
    if (j.contains("forest")) {
      const auto& f = j.at("forest");
      c.forest.n_trees = f.value("n_trees", c.forest.n_trees);
      c.forest.max_depth = f.value("max_depth", c.forest.max_depth);
      c.forest.min_samples_leaf = f.value("min_samples_leaf", c.forest.min_samples_leaf);
      c.forest.features_per_split = f.value("features_per_split", c.forest.features_per_split);
      c.forest.bootstrap = f.value("bootstrap", c.forest.bootstrap);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
      c.train.patience = t.value("patience", c.train.patience);
      c.train.cosine_horizon = t.value("cosine_horizon", c.train.cosine_horizon);
      c.train.optimizer.lr = t.value("lr", c.train.optimizer.lr);
      c.train.optimizer.beta1 = t.value("beta1", c.train.optimizer.beta1);
      c.train.optimizer.beta2 = t.value("beta2", c.train.optimizer.beta2);
      c.train.optimizer.eps = t.value("eps", c.train.optimizer.eps);
      c.train.optimizer.weight_decay = t.value("weight_decay", c.train.optimizer.weight_decay);
    }
    c.augment = j.value("augment", c.augment);
    c.iou_quantile = j.value("iou_quantile", c.iou_quantile);
    c.heatmaps_written = j.value("heatmaps_written", c.heatmaps_written);
    c.shap_background = j.value("shap_background", c.shap_background);
    c.shap_samples = j.value("shap_samples", c.shap_samples);
    if (j.contains("audit")) {
      const auto& a = j.at("audit");
      c.audit.bias.min_bias = a.value("min_bias", c.audit.bias.min_bias);
      c.audit.bias.alpha = a.value("alpha", c.audit.bias.alpha);
      c.audit.corruption_asymmetry = a.value("corruption_asymmetry", c.audit.corruption_asymmetry);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what(), 0);
  }
}

CellSpec make_cell(const std::string& prefix, ModelName model, std::uint64_t seed, double sigma,
                   double fraction, Condition condition) {
  CellSpec c;
  c.model = model;
  c.seed = seed;
  c.sigma = sigma;
  c.fraction = fraction;
  c.condition = condition;
  c.id = prefix + "." + model_name(model) + ".seed" + std::to_string(seed);
  if (sigma != 0.0 || prefix == "noise") c.id += ".sigma" + grid_label(sigma);
  if (fraction != 1.0 || prefix == "lc") c.id += ".frac" + grid_label(fraction);
  if (condition != Condition::Clean || prefix == "corruption") {
    c.id += "." + condition_name(condition);
  }
  return c;
}

json to_json(const CellSpec& c) {
  return json{{"id", c.id},
              {"model", model_name(c.model)},
              {"seed", c.seed},
              {"sigma", c.sigma},
              {"fraction", c.fraction},
              {"condition", condition_name(c.condition)}};
}

CellSpec cell_from_json(const json& j) {
  try {
    CellSpec c;
    c.id = j.at("id").get<std::string>();
    c.model = model_from_name(j.at("model").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.sigma = j.at("sigma").get<double>();
    c.fraction = j.at("fraction").get<double>();
    c.condition = condition_from_name(j.at("condition").get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("cell spec: ") + e.what(), 0);
  }
}

}  // namespace cascade::experiments
