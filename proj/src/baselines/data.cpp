#include "cascade/baselines/data.hpp"

#include "cascade/common/error.hpp"

namespace cascade::baselines {

Normalization fit_normalization(const Dataset& dataset) {
  std::vector<SensorWindow> train;
  for (std::size_t i : dataset.indices(Split::Train)) train.push_back(dataset.samples[i].sensors);
  if (train.empty()) throw InvalidArgument("dataset has no training split");
  return {fit_scaler(train), ThermalNormalizer{}};
}

PreparedData prepare(const Dataset& dataset, const Normalization& norm) {
  PreparedData out;
  out.sensors.reserve(dataset.size());
  out.thermal.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    out.sensors.push_back(apply_scaler(norm.scaler, s.sensors));
    out.thermal.push_back(normalize_thermal(norm.thermal, s.thermal));
    out.labels.push_back(static_cast<int>(to_index(s.label)));
  }
  return out;
}

PreparedData corrupt(const PreparedData& data, Modality which) {
  PreparedData out = data;
  if (which == Modality::Sensor) {
    for (auto& w : out.sensors) std::fill(w.values.begin(), w.values.end(), 0.0);
  } else {
    for (auto& f : out.thermal) std::fill(f.pixels.begin(), f.pixels.end(), 0.0);
  }
  return out;
}

PreparedData with_sensor_noise(const PreparedData& data, double sigma, std::uint64_t seed) {
  PreparedData out = data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Rng rng = make_rng(seed, 0x4015e000 + i);
    out.sensors[i] = inject_noise(out.sensors[i], sigma, rng);
  }
  return out;
}

nk::Tensor sensor_batch(const PreparedData& data, std::span<const std::size_t> idx,
                        const AugmentOptions& augment, Rng* rng) {
  if (idx.empty()) throw InvalidArgument("empty batch");
  const auto& first = data.sensors.at(idx[0]);
  const int t = first.timesteps, d = first.channels;
  std::vector<double> v;
  v.reserve(idx.size() * static_cast<std::size_t>(t * d));
  for (std::size_t i : idx) {
    const SensorWindow& w = data.sensors.at(i);
    if (w.timesteps != t || w.channels != d) throw DimensionError("ragged sensor windows");
    if (augment.enabled && rng != nullptr) {
      SensorWindow a = augment_sensor(w, *rng, augment.sensor);
      v.insert(v.end(), a.values.begin(), a.values.end());
    } else {
      v.insert(v.end(), w.values.begin(), w.values.end());
    }
  }
  return nk::Tensor::from(
      {idx.size(), static_cast<std::size_t>(t), static_cast<std::size_t>(d)}, std::move(v));
}

nk::Tensor thermal_batch(const PreparedData& data, std::span<const std::size_t> idx,
                         const AugmentOptions& augment, Rng* rng) {
  if (idx.empty()) throw InvalidArgument("empty batch");
  const auto& first = data.thermal.at(idx[0]);
  const int h = first.height, w = first.width;
  std::vector<double> v;
  v.reserve(idx.size() * static_cast<std::size_t>(h * w));
  for (std::size_t i : idx) {
    const ThermalFrame& f = data.thermal.at(i);
    if (f.height != h || f.width != w) throw DimensionError("ragged thermal frames");
    if (augment.enabled && rng != nullptr) {
      ThermalFrame a = augment_thermal(f, *rng, augment.thermal);
      v.insert(v.end(), a.pixels.begin(), a.pixels.end());
    } else {
      v.insert(v.end(), f.pixels.begin(), f.pixels.end());
    }
  }
  return nk::Tensor::from(
      {idx.size(), 1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}, std::move(v));
}

std::vector<int> label_batch(const PreparedData& data, std::span<const std::size_t> idx) {
  std::vector<int> y;
  y.reserve(idx.size());
  for (std::size_t i : idx) y.push_back(data.labels.at(i));
  return y;
}

}  // namespace cascade::baselines
