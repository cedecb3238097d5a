#include "cascade/core/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cascade/common/error.hpp"
#include "cascade/common/rng.hpp"
#include "cascade/core/split.hpp"

namespace cascade {
namespace {

// Sensor model, in arbitrary but consistent units.
constexpr double kNtcBase = 35.0;
constexpr double kNtcOffsetStd = 1.0;
constexpr double kNtcShiftPerClass = 1.0;
constexpr double kNtcNoiseStd = 0.35;
constexpr double kNtcInflationPerClass = 0.6;
constexpr double kPmBase = 25.0;
constexpr double kPmOffsetStd = 1.0;
constexpr double kPmNoiseStd = 1.0;
constexpr double kPmInflationPerClass = 0.4;
constexpr double kOtherBase = 5.0;
constexpr double kOtherOffsetStd = 0.5;
constexpr double kOtherNoiseStd = 0.3;
constexpr double kSpikeNtc = 4.0;
constexpr double kSpikePm = 6.0;

// Thermal model, degrees Celsius.
constexpr double kCameraMin = 20.0;
constexpr double kCameraMax = 120.0;
constexpr double kAmbient = 28.0;
constexpr double kAmbientStd = 2.0;
constexpr double kGradientRange = 3.0;
constexpr double kBlobMax = 3.0;
constexpr double kRegionPeak = 14.0;
constexpr double kRegionPeakStd = 2.5;
constexpr double kRegionShiftPerClass = 8.0;
constexpr double kPixelNoiseStd = 0.6;

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<LabelClass> allocate_labels(const GeneratorConfig& config, Rng& rng) {
  // Largest-remainder allocation so empirical frequencies track the priors.
  const auto n = static_cast<std::size_t>(config.n_samples);
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> remainders{};
  std::size_t assigned = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double exact = config.class_priors[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    remainders[c] = exact - std::floor(exact);
    assigned += counts[c];
  }
  while (assigned < n) {
    const auto best = static_cast<std::size_t>(
        std::max_element(remainders.begin(), remainders.end()) - remainders.begin());
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  std::vector<LabelClass> labels;
  labels.reserve(n);
  for (int c = 0; c < kNumClasses; ++c) {
    labels.insert(labels.end(), counts[c], static_cast<LabelClass>(c));
  }
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

SensorWindow make_window(const GeneratorConfig& config, const std::vector<std::string>& names,
                         int severity, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int T = config.timesteps;
  const int D = config.channels;
  const double s = config.sensor_signal_strength * severity;
  SensorWindow w(T, D, names);

  for (int d = 0; d < D; ++d) {
    double level = 0.0;
    double noise = 0.0;
    if (d == 0) {
      level = kNtcBase + kNtcOffsetStd * gauss(rng) + kNtcShiftPerClass * s;
      noise = kNtcNoiseStd * (1.0 + kNtcInflationPerClass * s);
    } else if (d == 1 || d == 2) {
      level = kPmBase + kPmOffsetStd * gauss(rng);
      noise = kPmNoiseStd * (1.0 + kPmInflationPerClass * s);
    } else {
      level = kOtherBase + kOtherOffsetStd * gauss(rng);
      noise = kOtherNoiseStd;
    }
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (int t = 0; t < T; ++t) {
      const double drift = 0.3 * noise * std::sin(phase + 2.0 * std::numbers::pi * t / T);
      w.at(t, d) = level + drift + noise * gauss(rng);
    }
  }
  if (severity == to_index(LabelClass::Danger) && config.danger_spike_rate > 0.0) {
    for (int t = 0; t < T; ++t) {
      if (unit(rng) >= config.danger_spike_rate) continue;
      const double scale = config.sensor_signal_strength;
      if (D > 0) w.at(t, 0) += kSpikeNtc * scale * (0.5 + unit(rng));
      for (int d = 1; d < std::min(D, 3); ++d) w.at(t, d) += kSpikePm * scale * (0.5 + unit(rng));
    }
  }
  for (double& v : w.values) v = quantize(v);
  return w;
}

ThermalFrame make_frame(const GeneratorConfig& config, int severity, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int H = config.height;
  const int W = config.width;
  ThermalFrame f(H, W);

  const double ambient = kAmbient + kAmbientStd * gauss(rng);
  const double grad_r = kGradientRange * (2.0 * unit(rng) - 1.0);
  const double grad_c = kGradientRange * (2.0 * unit(rng) - 1.0);
  const double blob_amp = kBlobMax * unit(rng);
  const double blob_r = H * unit(rng);
  const double blob_c = W * unit(rng);
  const double blob_sigma = 0.25 * std::min(H, W);

  const int bh = std::max(2, static_cast<int>(std::lround(H / 3.0)));
  const int bw = std::max(2, static_cast<int>(std::lround(W / 3.0)));
  std::uniform_int_distribution<int> row_pick(0, H - bh);
  std::uniform_int_distribution<int> col_pick(0, W - bw);
  const HotspotBox box{row_pick(rng), col_pick(rng), 0, 0};
  const HotspotBox region{box.row0, box.col0, box.row0 + bh, box.col0 + bw};

  const double peak = kRegionPeak + kRegionPeakStd * gauss(rng) +
                      kRegionShiftPerClass * config.thermal_signal_strength * severity;
  const double noise_std = kPixelNoiseStd * std::sqrt(config.thermal_variance_inflation);

  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double v = ambient + grad_r * (static_cast<double>(r) / H - 0.5) +
                 grad_c * (static_cast<double>(c) / W - 0.5);
      const double dr = r - blob_r;
      const double dc = c - blob_c;
      v += blob_amp * std::exp(-(dr * dr + dc * dc) / (2.0 * blob_sigma * blob_sigma));
      if (region.contains(r, c)) {
        const double u = (r - region.row0 + 0.5) / bh;
        const double z = (c - region.col0 + 0.5) / bw;
        const double bump = std::sqrt(std::sin(std::numbers::pi * u) * std::sin(std::numbers::pi * z));
        v += std::max(peak, 0.0) * bump;
      }
      v += noise_std * gauss(rng);
      f.at(r, c) = quantize(std::clamp(v, kCameraMin, kCameraMax));
    }
  }
  if (severity > 0) f.hotspot = region;
  return f;
}

}  // namespace

Dataset generate_dataset(const GeneratorConfig& config) {
  config.validate();
  Dataset ds;
  ds.seed = config.seed;
  ds.config = config;
  ds.channel_names = default_channel_names(config.channels);

  Rng label_rng = make_rng(config.seed, 0x1abe1);
  const auto labels = allocate_labels(config, label_rng);
  ds.samples.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    // One independent stream per sample keeps each sample reproducible on
    // its own.
    Rng rng = make_rng(config.seed, 0x100000 + i);
    const int severity = to_index(labels[i]);
    Sample s;
    s.label = labels[i];
    s.sensors = make_window(config, ds.channel_names, severity, rng);
    s.thermal = make_frame(config, severity, rng);
    ds.samples.push_back(std::move(s));
  }
  return stratified_split(std::move(ds), config.train_fraction, config.seed);
}

}  // namespace cascade
