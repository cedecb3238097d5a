#pragma once

#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/baselines/models.hpp"
#include "cascade/forest/forest.hpp"
#include "cascade/treeshap/treeshap.hpp"

namespace cascade {

// ---- modality bias ----------------------------------------------------------

struct BiasThresholds {
  double min_bias = 0.1;  // |B| must exceed this
  double alpha = 0.05;    // and the t-test must reject at this level
};

enum class BiasVerdict { Balanced, ThermalBiased, SensorBiased };
std::string bias_verdict_name(BiasVerdict v);

struct BiasReport {
  std::size_t n = 0;
  double mean_gate = 0.0;
  double std_gate = 0.0;  // sample std
  double ideal_gate = 0.0;
  double bias = 0.0;      // mean_gate - ideal_gate
  double t_statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // zero gate variance
  BiasVerdict verdict = BiasVerdict::Balanced;
};

// g* = f1_thermal / (f1_thermal + f1_sensor).
double ideal_gate(double f1_thermal, double f1_sensor);

// Gates are the weights on the thermal-attended branch. One-sample two-sided
// t-test of the gate mean against g*.
BiasReport modality_bias(std::span<const double> gates, double g_star,
                         const BiasThresholds& thresholds = {});

// ---- mutual information -----------------------------------------------------

inline constexpr std::size_t kMiSmallSample = 100;

struct MiEstimate {
  double bits = 0.0;
  bool single_class = false;  // labels carry no information; bits forced to 0
  bool small_sample = false;  // fewer than kMiSmallSample samples
};

// Plug-in estimate sum p(y,z) log2 p(y,z) / (p(y) p(z)) over discrete codes.
MiEstimate mutual_information_discrete(std::span<const int> labels, std::span<const int> z);

// Quantile bin edges (type 7, k / n_bins for k = 1..n_bins-1) and the bin of
// each value: the number of edges <= value. Ties always share a bin.
std::vector<int> quantile_bins(std::span<const double> values, std::size_t n_bins);

// Continuous features [n x dims], row-major. Each dimension is quantile
// binned; with more than one dimension the bin codes are projected on their
// first principal direction and that projection is binned again.
MiEstimate mutual_information(std::span<const int> labels, std::span<const double> features,
                              std::size_t dims, std::size_t n_bins = 16);

// ---- gradient-to-signal ratio -----------------------------------------------

inline constexpr double kMiFloorBits = 1e-6;

struct ModalityGsr {
  double gradient_norm = 0.0;  // mean over minibatches of ||dL/d theta_m||
  double mi_bits = 0.0;
  bool mi_floored = false;
  double ratio = 0.0;  // gradient_norm / max(mi_bits, floor)
};

struct GsrReport {
  ModalityGsr sensor;
  ModalityGsr thermal;
};

// Gradients of the evaluation-mode batch loss with respect to each encoder's
// parameters. MI is taken between labels and the pooled contexts c_s, c_t.
// Parameter gradients are cleared on return.
GsrReport gsr(const baselines::FusionModel& model, const baselines::PreparedData& data,
              std::span<const std::size_t> idx, std::size_t batch_size = 32,
              std::size_t n_bins = 16);

// ---- corruption -------------------------------------------------------------

using Predictor =
    std::function<std::vector<int>(const baselines::PreparedData&, std::span<const std::size_t>)>;

// The returned predictors hold references; the models must outlive them.
// The forest sees statistical features of the model-space windows.
Predictor forest_predictor(const Forest& forest);
Predictor neural_predictor(const baselines::NeuralModel& model);
Predictor late_fusion_predictor(const baselines::LateFusion& model);

struct NamedPredictor {
  std::string name;
  Predictor predict;
};

struct CorruptionRow {
  std::string model;
  double f1_clean = 0.0;
  double f1_zero_thermal = 0.0;
  double f1_zero_sensor = 0.0;
  // Corrupted minus clean; a drop is negative.
  double delta_zero_thermal() const { return f1_zero_thermal - f1_clean; }
  double delta_zero_sensor() const { return f1_zero_sensor - f1_clean; }
};

std::vector<CorruptionRow> corruption_matrix(std::span<const NamedPredictor> models,
                                             const baselines::PreparedData& data,
                                             std::span<const std::size_t> idx);

void write_corruption_csv(std::ostream& out, std::span<const CorruptionRow> rows);

// ---- audit protocol ---------------------------------------------------------

struct AuditInputs {
  std::vector<double> gates;  // fusion gate per validation sample
  double f1_sensor = 0.0;     // best sensor-only model
  double f1_thermal = 0.0;    // thermal-only model
  double f1_fusion = 0.0;
  std::vector<SensorImportance> sensor_attribution;
  nlohmann::json thermal_attribution = nlohmann::json::object();
  CorruptionRow fusion_corruption;
};

struct AuditConfig {
  BiasThresholds bias;
  // Flag when the zero-sensor and zero-thermal drops differ by this much.
  double corruption_asymmetry = 0.2;
};

struct AuditStep {
  int number = 0;
  std::string name;
  bool flagged = false;
  nlohmann::json evidence;
};

struct AuditReport {
  BiasReport bias;
  std::vector<AuditStep> steps;

  int flag_count() const;
};

// 1 gate inspection, 2 unimodal vs fusion, 3 attribution summaries (never
// flags), 4 gate-weight vs standalone-F1 rank agreement, 5 corruption
// asymmetry.
AuditReport audit_protocol(const AuditInputs& inputs, const AuditConfig& config = {});

nlohmann::json to_json(const BiasReport& r);
nlohmann::json to_json(const GsrReport& r);
nlohmann::json to_json(std::span<const CorruptionRow> rows);
nlohmann::json to_json(const AuditReport& r);
void print_audit_summary(std::ostream& out, const AuditReport& r);

}  // namespace cascade
