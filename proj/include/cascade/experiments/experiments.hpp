#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "cascade/baselines/models.hpp"
#include "cascade/diagnostics/diagnostics.hpp"
#include "cascade/evalstat/evalstat.hpp"
#include "cascade/features/features.hpp"
#include "cascade/forest/forest.hpp"
#include "cascade/localizer/localizer.hpp"

namespace cascade::experiments {

enum class ExperimentKind { Ablation, NoiseSweep, LearningCurve, Corruption, Audit, Localize, Shap };
std::string experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Ablation;
  // Load this dataset directory instead of generating one.
  std::optional<std::string> dataset_path;
  GeneratorConfig generator;
  std::vector<std::uint64_t> seeds{42, 123, 456, 789, 1024};
  std::string output_dir;

  std::vector<double> sigma_grid{0.0, 0.05, 0.1, 0.15, 0.2, 0.3};
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.5, 0.8, 1.0};
  std::size_t learning_curve_seeds = 3;

  ForestConfig forest;
  nk::TrainConfig train;
  bool augment = true;

  double iou_quantile = 0.9;
  std::size_t heatmaps_written = 24;
  std::size_t shap_background = 100;
  std::size_t shap_samples = 200;
  AuditConfig audit;

  // Seeds nonempty, grids sorted ascending and in range.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

enum class ModelName { Forest, Sequence, Thermal, Fusion, LateFusion };
std::string model_name(ModelName m);
ModelName model_from_name(const std::string& name);

enum class Condition { Clean, ZeroThermal, ZeroSensor };
std::string condition_name(Condition c);
Condition condition_from_name(const std::string& name);

// One model x seed x grid point. Enough to recompute its metrics from the
// experiment config alone.
struct CellSpec {
  std::string id;
  ModelName model = ModelName::Forest;
  std::uint64_t seed = 0;
  double sigma = 0.0;     // sensor noise at evaluation
  double fraction = 1.0;  // share of the training split used
  Condition condition = Condition::Clean;
};

CellSpec make_cell(const std::string& prefix, ModelName model, std::uint64_t seed,
                   double sigma = 0.0, double fraction = 1.0,
                   Condition condition = Condition::Clean);

nlohmann::json to_json(const CellSpec& c);
CellSpec cell_from_json(const nlohmann::json& j);

struct TrainingSummary {
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  double seconds = 0.0;
};

struct CellResult {
  CellSpec spec;
  MetricsRow metrics;
  std::optional<TrainingSummary> training;  // absent for the forest
  // Set when training diverged; metrics are then all zero.
  std::optional<std::string> failure;
};

// Header plus one row labelled with the cell id.
std::string metrics_csv(const CellResult& cell);

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  nlohmann::json config;
  std::vector<CellResult> cells;  // sorted by id
  std::vector<SignificanceRow> significance;
  std::optional<BiasReport> bias;
  std::vector<Assertion> assertions;
  nlohmann::json summary = nlohmann::json::object();
  std::map<std::string, std::string> artifacts;  // name -> path relative to the output dir

  bool all_passed() const;
  const CellResult& cell(const std::string& id) const;
};

// Simplifications relative to the reference architecture, listed in every
// report.
const std::vector<std::string>& recorded_deviations();

nlohmann::json to_json(const ExperimentReport& r);

// Dataset, normalisation and lazily trained models shared by every cell.
class Workspace {
 public:
  explicit Workspace(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const Dataset& dataset() const { return dataset_; }
  const baselines::PreparedData& data() const { return data_; }
  const std::vector<std::size_t>& train_indices() const { return train_; }
  const std::vector<std::size_t>& validation_indices() const { return val_; }
  const std::vector<int>& validation_labels() const { return val_labels_; }
  // Statistical features of every model-space window.
  const FeatureMatrix& features() const { return features_; }

  // Stratified subsample of the training split; fraction 1 is the full split.
  std::vector<std::size_t> training_subset(double fraction, std::uint64_t seed) const;

  const Forest& forest(std::uint64_t seed, double fraction = 1.0);
  const baselines::SequenceClassifier& sequence(std::uint64_t seed, double fraction = 1.0);
  const baselines::ThermalClassifier& thermal(std::uint64_t seed, double fraction = 1.0);
  const baselines::FusionModel& fusion(std::uint64_t seed, double fraction = 1.0);
  std::shared_ptr<const baselines::SequenceClassifier> sequence_ptr(std::uint64_t seed,
                                                                    double fraction = 1.0);
  std::shared_ptr<const baselines::ThermalClassifier> thermal_ptr(std::uint64_t seed,
                                                                  double fraction = 1.0);

  std::optional<TrainingSummary> training_summary(ModelName model, std::uint64_t seed,
                                                  double fraction) const;
  const nk::TrainingHistory* history(ModelName model, std::uint64_t seed, double fraction) const;

  // Evaluation data for a sensor noise level (sigma 0 is the clean data).
  const baselines::PreparedData& evaluation_data(double sigma, std::uint64_t seed);

  CellResult compute_cell(const CellSpec& spec);

 private:
  template <class M>
  struct Trained {
    std::shared_ptr<M> model;
    nk::TrainingHistory history;
    double seconds = 0.0;
  };
  using Key = std::tuple<std::uint64_t, std::int64_t>;
  static Key key(std::uint64_t seed, double fraction);
  baselines::TrainOptions train_options(std::uint64_t seed) const;

  ExperimentConfig config_;
  Dataset dataset_;
  baselines::Normalization norm_;
  baselines::PreparedData data_;
  std::vector<std::size_t> train_, val_;
  std::vector<int> val_labels_;
  FeatureMatrix features_;

  std::map<Key, std::shared_ptr<Forest>> forests_;
  std::map<Key, Trained<baselines::SequenceClassifier>> sequences_;
  std::map<Key, Trained<baselines::ThermalClassifier>> thermals_;
  std::map<Key, Trained<baselines::FusionModel>> fusions_;
  std::map<Key, baselines::PreparedData> noisy_;
};

// Each run writes its artifacts below out_dir (created if missing) and
// returns the report; write_report adds config.json, report.json and one
// metric CSV per cell under cells/.
ExperimentReport run_ablation(Workspace& ws, const std::filesystem::path& out_dir);
ExperimentReport run_noise_sweep(Workspace& ws, const std::filesystem::path& out_dir);
ExperimentReport run_learning_curve(Workspace& ws, const std::filesystem::path& out_dir);
ExperimentReport run_corruption(Workspace& ws, const std::filesystem::path& out_dir);
ExperimentReport run_audit(Workspace& ws, const std::filesystem::path& out_dir);
ExperimentReport run_localize(Workspace& ws, const std::filesystem::path& out_dir);
ExperimentReport run_shap(Workspace& ws, const std::filesystem::path& out_dir);

ExperimentReport run_experiment(Workspace& ws, const std::filesystem::path& out_dir);

void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

struct ReplayOutcome {
  std::string cell_id;
  bool identical = false;
  std::string expected;
  std::string actual;
};

// Recomputes cells of a written report from its config.json and compares
// the metric CSVs byte for byte. An empty cell list replays every cell.
std::vector<ReplayOutcome> replay(const std::filesystem::path& report_dir,
                                  const std::vector<std::string>& cell_ids = {});

// Refuses a non-empty existing directory unless force is set.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

// $CASCADE_OUTPUT_ROOT, else "cascade_runs".
std::filesystem::path default_output_root();

}  // namespace cascade::experiments
