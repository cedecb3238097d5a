#include <algorithm>
#include <cmath>

#include "cascade/diagnostics/diagnostics.hpp"
#include "cascade/evalstat/evalstat.hpp"

namespace cascade {

using nlohmann::json;

int AuditReport::flag_count() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(),
                                        [](const AuditStep& s) { return s.flagged; }));
}

namespace {

// Infinite t statistics (zero gate variance) are not valid JSON numbers.
json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

json to_json(const BiasReport& r) {
  return {{"n", r.n},
          {"mean_gate", r.mean_gate},
          {"std_gate", r.std_gate},
          {"ideal_gate", r.ideal_gate},
          {"bias", r.bias},
          {"t_statistic", finite_or_string(r.t_statistic)},
          {"p_value", r.p_value},
          {"degenerate", r.degenerate},
          {"verdict", bias_verdict_name(r.verdict)}};
}

json to_json(const GsrReport& r) {
  auto one = [](const ModalityGsr& m) {
    return json{{"gradient_norm", m.gradient_norm},
                {"mi_bits", m.mi_bits},
                {"mi_floored", m.mi_floored},
                {"ratio", m.ratio}};
  };
  return {{"sensor", one(r.sensor)}, {"thermal", one(r.thermal)}};
}

json to_json(std::span<const CorruptionRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"model", r.model},
                   {"f1_clean", r.f1_clean},
                   {"f1_zero_thermal", r.f1_zero_thermal},
                   {"f1_zero_sensor", r.f1_zero_sensor},
                   {"delta_zero_thermal", r.delta_zero_thermal()},
                   {"delta_zero_sensor", r.delta_zero_sensor()}});
  }
  return arr;
}

AuditReport audit_protocol(const AuditInputs& in, const AuditConfig& config) {
  AuditReport report;
  report.bias = modality_bias(in.gates, ideal_gate(in.f1_thermal, in.f1_sensor), config.bias);

  AuditStep gates{1, "inspect gate weights", report.bias.verdict != BiasVerdict::Balanced,
                  to_json(report.bias)};

  const double best_unimodal = std::max(in.f1_sensor, in.f1_thermal);
  const double delta = best_unimodal - in.f1_fusion;
  AuditStep unimodal{2, "compare unimodal and multimodal performance", delta > 0.0,
                     {{"f1_sensor", in.f1_sensor},
                      {"f1_thermal", in.f1_thermal},
                      {"f1_fusion", in.f1_fusion},
                      {"best_unimodal_minus_fusion", delta}}};

  json sensors = json::array();
  for (const auto& s : in.sensor_attribution)
    sensors.push_back({{"channel", s.channel}, {"importance", s.importance}});
  AuditStep attribution{3, "attribute each modality independently", false,
                        {{"sensor", sensors}, {"thermal", in.thermal_attribution}}};

  // Rank agreement between the weight each modality receives and how well
  // it performs alone. With two modalities rho is -1, 0 or +1.
  const std::vector<double> weight{report.bias.mean_gate, 1.0 - report.bias.mean_gate};
  const std::vector<double> standalone{in.f1_thermal, in.f1_sensor};
  const double rho = spearman(weight, standalone);
  AuditStep inversion{4, "check importance against performance", rho < 0.0,
                      {{"thermal_weight", weight[0]},
                       {"sensor_weight", weight[1]},
                       {"spearman_rho", rho}}};

  const double drop_thermal = -in.fusion_corruption.delta_zero_thermal();
  const double drop_sensor = -in.fusion_corruption.delta_zero_sensor();
  const double asymmetry = drop_sensor - drop_thermal;
  AuditStep robustness{5, "degrade one modality at a time",
                       std::abs(asymmetry) >= config.corruption_asymmetry,
                       {{"drop_zero_thermal", drop_thermal},
                        {"drop_zero_sensor", drop_sensor},
                        {"asymmetry", asymmetry},
                        {"threshold", config.corruption_asymmetry}}};

  report.steps = {gates, unimodal, attribution, inversion, robustness};
  return report;
}

json to_json(const AuditReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"step", s.number}, {"name", s.name}, {"flagged", s.flagged}, {"evidence", s.evidence}});
  return {{"bias", to_json(r.bias)}, {"steps", steps}, {"flags", r.flag_count()}};
}

void print_audit_summary(std::ostream& out, const AuditReport& r) {
  out << "modality bias: mean gate " << r.bias.mean_gate << ", ideal " << r.bias.ideal_gate
      << ", B = " << r.bias.bias << ", p = " << r.bias.p_value << " -> "
      << bias_verdict_name(r.bias.verdict) << '\n';
  for (const auto& s : r.steps)
    out << "  step " << s.number << " (" << s.name << "): " << (s.flagged ? "FLAG" : "ok") << '\n';
  out << r.flag_count() << " of " << r.steps.size() << " steps flagged\n";
}

}  // namespace cascade
