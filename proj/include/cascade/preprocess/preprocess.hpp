#pragma once

#include <span>
#include <vector>

#include "cascade/common/rng.hpp"
#include "cascade/core/types.hpp"

namespace cascade {

// Per-channel z-score statistics, fitted on training windows only.
struct ZScoreScaler {
  static constexpr double kMinStd = 1e-8;

  std::vector<double> mean;
  std::vector<double> std;
  std::vector<bool> degenerate;  // channel std was clamped to kMinStd
  std::size_t fitted_on = 0;     // number of windows

  bool any_degenerate() const;
};

// Statistics pool every timestep of every window; std is the population std.
ZScoreScaler fit_scaler(std::span<const SensorWindow> train_windows);
SensorWindow apply_scaler(const ZScoreScaler& scaler, const SensorWindow& window);
SensorWindow inverse_scaler(const ZScoreScaler& scaler, const SensorWindow& window);

// Min-max normalization over the camera's operating range.
struct ThermalNormalizer {
  double t_min = 20.0;
  double t_max = 120.0;
};

// pixel' = clamp((pixel - t_min) / (t_max - t_min), 0, 1).
ThermalFrame normalize_thermal(const ThermalNormalizer& normalizer, const ThermalFrame& frame);

struct SensorAugmentConfig {
  double noise = 0.01;
  // N(0, noise) is read as a variance (std = sqrt(noise)) unless false.
  bool noise_is_variance = true;
  double warp_prob = 0.1;
  // Interior warp knot displacement, as a fraction of T.
  double warp_max_shift = 0.2;
};

// Training-time augmentation: additive Gaussian noise on every entry, then a
// random piecewise-linear time warp with probability warp_prob.
SensorWindow augment_sensor(const SensorWindow& window, Rng& rng,
                            const SensorAugmentConfig& config = {});

// Resamples the window along a monotone piecewise-linear warp through
// (0, 0), (m + shift, m), (T-1, T-1) with m = (T-1)/2, using linear
// interpolation. shift = 0 is the identity.
SensorWindow time_warp(const SensorWindow& window, double knot_shift);

struct ThermalAugmentConfig {
  double flip_prob = 0.5;
  double max_rotation_deg = 10.0;
  double jitter = 0.1;
};

// Training-time augmentation; the hotspot box follows the pixels.
ThermalFrame augment_thermal(const ThermalFrame& frame, Rng& rng,
                             const ThermalAugmentConfig& config = {});

// Mirrors columns. Hotspot (r0, c0, r1, c1) maps to (r0, W - c1, r1, W - c0).
ThermalFrame flip_horizontal(const ThermalFrame& frame);

// Rotates about the frame centre with bilinear resampling and replicate-edge
// padding. The hotspot becomes the bounding box of its rotated corners,
// clipped to the frame.
ThermalFrame rotate(const ThermalFrame& frame, double degrees);

// q = brightness * p, then p' = m + contrast * (q - m) with m the frame mean of q.
ThermalFrame jitter_intensity(const ThermalFrame& frame, double brightness, double contrast);

// Adds i.i.d. N(0, sigma^2) to every entry; sigma is a standard deviation.
SensorWindow inject_noise(const SensorWindow& window, double sigma, Rng& rng);

enum class Modality { Sensor, Thermal };

// Replaces one modality with zeros of identical shape.
Sample corrupt_modality(const Sample& sample, Modality which);

}  // namespace cascade
