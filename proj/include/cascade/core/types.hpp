#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

inline constexpr int kNumClasses = 4;

// Equipment state, ordered by severity.
enum class LabelClass : int { Normal = 0, Caution = 1, Warning = 2, Danger = 3 };

inline int to_index(LabelClass c) { return static_cast<int>(c); }
LabelClass label_from_index(int index);
std::string_view label_name(LabelClass c);

using ClassVector = std::array<double, kNumClasses>;

// A [timesteps x channels] window of raw sensor readings, row-major by time.
struct SensorWindow {
  int timesteps = 0;
  int channels = 0;
  std::vector<double> values;
  std::vector<std::string> channel_names;

  SensorWindow() = default;
  SensorWindow(int t, int d, std::vector<std::string> names);

  double& at(int t, int d) { return values[static_cast<std::size_t>(t) * channels + d]; }
  double at(int t, int d) const { return values[static_cast<std::size_t>(t) * channels + d]; }

  // Throws if the shape invariants (T >= 2, D >= 1, finite entries) fail.
  void validate() const;

  bool operator==(const SensorWindow&) const = default;
};

// Axis-aligned half-open pixel box [row0, row1) x [col0, col1).
struct HotspotBox {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;

  int area() const { return (row1 - row0) * (col1 - col0); }
  bool contains(int row, int col) const {
    return row >= row0 && row < row1 && col >= col0 && col < col1;
  }
  bool operator==(const HotspotBox&) const = default;
};

// Single-channel thermal image, row-major. Pixel units are degrees Celsius
// for raw frames and [0, 1] after normalization.
struct ThermalFrame {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;
  std::optional<HotspotBox> hotspot;

  ThermalFrame() = default;
  ThermalFrame(int h, int w, double fill = 0.0);

  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

  void validate() const;

  bool operator==(const ThermalFrame&) const = default;
};

struct Sample {
  SensorWindow sensors;
  ThermalFrame thermal;
  LabelClass label = LabelClass::Normal;

  bool operator==(const Sample&) const = default;
};

enum class Split : int { Train = 0, Validation = 1 };

struct GeneratorConfig {
  int n_samples = 1600;
  // Class counts of the reference corpus (4836, 3610, 3631, 1044 of 13121).
  std::array<double, kNumClasses> class_priors{4836.0 / 13121.0, 3610.0 / 13121.0,
                                               3631.0 / 13121.0, 1044.0 / 13121.0};
  int timesteps = 20;
  int channels = 8;
  int height = 48;
  int width = 50;
  double sensor_signal_strength = 1.0;
  double thermal_signal_strength = 0.5;
  double thermal_variance_inflation = 4.0;
  double danger_spike_rate = 0.1;
  double train_fraction = 0.85;
  std::uint64_t seed = 7;

  // Throws InvalidArgument on any violated invariant.
  void validate() const;

  bool operator==(const GeneratorConfig&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<Split> split;
  std::uint64_t seed = 0;
  GeneratorConfig config;
  std::vector<std::string> channel_names;

  std::size_t size() const { return samples.size(); }
  std::vector<std::size_t> indices(Split which) const;
  std::array<std::size_t, kNumClasses> class_counts(std::optional<Split> which = {}) const;

  bool operator==(const Dataset&) const = default;
};

// Default channel identifiers: ntc, pm10, pm2_5, pm1_0, ct1..ct4 for the
// 8-sensor layout, ch<i> beyond that.
std::vector<std::string> default_channel_names(int channels);

}  // namespace cascade
