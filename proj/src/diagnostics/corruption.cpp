#include "cascade/common/error.hpp"
#include "cascade/diagnostics/diagnostics.hpp"
#include "cascade/evalstat/evalstat.hpp"
#include "cascade/features/features.hpp"

namespace cascade {

Predictor forest_predictor(const Forest& forest) {
  return [&forest](const baselines::PreparedData& data, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
      out.push_back(to_index(forest.predict(extract_statistical(data.sensors[i]).values)));
    }
    return out;
  };
}

Predictor neural_predictor(const baselines::NeuralModel& model) {
  return [&model](const baselines::PreparedData& data, std::span<const std::size_t> idx) {
    return baselines::argmax_labels(baselines::predict_proba(model, data, idx));
  };
}

Predictor late_fusion_predictor(const baselines::LateFusion& model) {
  return [&model](const baselines::PreparedData& data, std::span<const std::size_t> idx) {
    return baselines::argmax_labels(model.predict_proba(data, idx));
  };
}

std::vector<CorruptionRow> corruption_matrix(std::span<const NamedPredictor> models,
                                             const baselines::PreparedData& data,
                                             std::span<const std::size_t> idx) {
  if (idx.empty()) throw InvalidArgument("corruption matrix needs samples");
  const auto truth = baselines::label_batch(data, idx);
  const auto no_thermal = baselines::corrupt(data, Modality::Thermal);
  const auto no_sensor = baselines::corrupt(data, Modality::Sensor);
  std::vector<CorruptionRow> rows;
  for (const auto& m : models) {
    CorruptionRow r;
    r.model = m.name;
    r.f1_clean = macro_f1(truth, m.predict(data, idx));
    r.f1_zero_thermal = macro_f1(truth, m.predict(no_thermal, idx));
    r.f1_zero_sensor = macro_f1(truth, m.predict(no_sensor, idx));
    rows.push_back(r);
  }
  return rows;
}

void write_corruption_csv(std::ostream& out, std::span<const CorruptionRow> rows) {
  auto old = out.precision(10);
  out << "model,f1_clean,f1_zero_thermal,f1_zero_sensor,delta_zero_thermal,delta_zero_sensor\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.f1_clean << ',' << r.f1_zero_thermal << ',' << r.f1_zero_sensor
        << ',' << r.delta_zero_thermal() << ',' << r.delta_zero_sensor() << '\n';
  }
  out.precision(old);
}

}  // namespace cascade
