#include <cmath>

#include "cascade/common/error.hpp"
#include "cascade/common/math.hpp"
#include "cascade/diagnostics/diagnostics.hpp"
#include "cascade/evalstat/evalstat.hpp"

namespace cascade {

std::string bias_verdict_name(BiasVerdict v) {
  switch (v) {
    case BiasVerdict::Balanced: return "balanced";
    case BiasVerdict::ThermalBiased: return "thermal_biased";
    case BiasVerdict::SensorBiased: return "sensor_biased";
  }
  return "unknown";
}

double ideal_gate(double f1_thermal, double f1_sensor) {
  if (!(f1_thermal >= 0.0 && f1_thermal <= 1.0 && f1_sensor >= 0.0 && f1_sensor <= 1.0))
    throw InvalidArgument("F1 scores must lie in [0, 1]");
  if (f1_thermal + f1_sensor == 0.0) throw InvalidArgument("both F1 scores are zero");
  return f1_thermal / (f1_thermal + f1_sensor);
}

BiasReport modality_bias(std::span<const double> gates, double g_star,
                         const BiasThresholds& thresholds) {
  if (gates.size() < 2) throw InvalidArgument("modality bias needs at least 2 gate values");
  BiasReport r;
  r.n = gates.size();
  r.mean_gate = mean_of(gates);
  r.std_gate = sample_std_of(gates);
  r.ideal_gate = g_star;
  r.bias = r.mean_gate - g_star;
  auto t = one_sample_t_test(gates, g_star);
  r.t_statistic = t.t;
  r.p_value = t.p;
  r.degenerate = t.degenerate;
  if (r.p_value < thresholds.alpha) {
    if (r.bias > thresholds.min_bias) r.verdict = BiasVerdict::ThermalBiased;
    else if (r.bias < -thresholds.min_bias) r.verdict = BiasVerdict::SensorBiased;
  }
  return r;
}

}  // namespace cascade
