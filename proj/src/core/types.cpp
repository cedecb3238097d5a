#include "cascade/core/types.hpp"

#include <cmath>
#include <numeric>

#include "cascade/common/error.hpp"

namespace cascade {

LabelClass label_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw InvalidArgument("label index out of range: " + std::to_string(index));
  }
  return static_cast<LabelClass>(index);
}

std::string_view label_name(LabelClass c) {
  switch (c) {
    case LabelClass::Normal: return "Normal";
    case LabelClass::Caution: return "Caution";
    case LabelClass::Warning: return "Warning";
    case LabelClass::Danger: return "Danger";
  }
  return "?";
}

SensorWindow::SensorWindow(int t, int d, std::vector<std::string> names)
    : timesteps(t), channels(d), values(static_cast<std::size_t>(t) * d, 0.0),
      channel_names(std::move(names)) {}

void SensorWindow::validate() const {
  if (timesteps < 2) throw InvalidArgument("sensor window needs T >= 2");
  if (channels < 1) throw InvalidArgument("sensor window needs D >= 1");
  if (values.size() != static_cast<std::size_t>(timesteps) * channels) {
    throw DimensionError("sensor window holds " + std::to_string(values.size()) +
                         " values, expected T*D = " +
                         std::to_string(static_cast<std::size_t>(timesteps) * channels));
  }
  if (!channel_names.empty() && channel_names.size() != static_cast<std::size_t>(channels)) {
    throw DimensionError("channel name count does not match D");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("sensor window contains a non-finite value");
  }
}

ThermalFrame::ThermalFrame(int h, int w, double fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

void ThermalFrame::validate() const {
  if (height < 8 || width < 8) throw InvalidArgument("thermal frame must be at least 8x8");
  if (pixels.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("thermal frame pixel count does not match H*W");
  }
  if (hotspot) {
    const auto& b = *hotspot;
    if (b.row0 < 0 || b.col0 < 0 || b.row1 > height || b.col1 > width || b.row0 >= b.row1 ||
        b.col0 >= b.col1) {
      throw InvalidArgument("hotspot box lies outside the frame or is empty");
    }
  }
}

void GeneratorConfig::validate() const {
  double total = 0.0;
  for (double p : class_priors) {
    if (!(p >= 0.0)) throw InvalidArgument("class priors must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("class priors must sum to 1 (got " + std::to_string(total) + ")");
  }
  if (n_samples < 40) throw InvalidArgument("n_samples must be >= 40 to stratify 4 classes");
  if (timesteps < 2) throw InvalidArgument("timesteps must be >= 2");
  if (channels < 1) throw InvalidArgument("channels must be >= 1");
  if (height < 8 || width < 8) throw InvalidArgument("thermal frames must be at least 8x8");
  if (sensor_signal_strength < 0.0 || thermal_signal_strength < 0.0) {
    throw InvalidArgument("signal strengths must be non-negative");
  }
  if (thermal_variance_inflation < 1.0) {
    throw InvalidArgument("thermal_variance_inflation must be >= 1");
  }
  if (danger_spike_rate < 0.0 || danger_spike_rate > 1.0) {
    throw InvalidArgument("danger_spike_rate must be a probability");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie in (0, 1)");
  }
}

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

std::array<std::size_t, kNumClasses> Dataset::class_counts(std::optional<Split> which) const {
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (which && (i >= split.size() || split[i] != *which)) continue;
    ++counts[static_cast<std::size_t>(to_index(samples[i].label))];
  }
  return counts;
}

std::vector<std::string> default_channel_names(int channels) {
  static const char* kNames[] = {"ntc", "pm10", "pm2_5", "pm1_0", "ct1", "ct2", "ct3", "ct4"};
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(channels));
  for (int d = 0; d < channels; ++d) {
    names.emplace_back(d < 8 ? kNames[d] : "ch" + std::to_string(d));
  }
  return names;
}

}  // namespace cascade
