#include "cascade/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cascade/common/error.hpp"

namespace cascade {

bool ZScoreScaler::any_degenerate() const {
  return std::any_of(degenerate.begin(), degenerate.end(), [](bool b) { return b; });
}

ZScoreScaler fit_scaler(std::span<const SensorWindow> windows) {
  if (windows.empty()) throw InvalidArgument("fit_scaler needs at least one window");
  const int D = windows.front().channels;
  std::vector<double> sum(D, 0.0);
  std::size_t count = 0;
  for (const auto& w : windows) {
    if (w.channels != D) throw DimensionError("windows disagree on channel count");
    for (int t = 0; t < w.timesteps; ++t) {
      for (int d = 0; d < D; ++d) {
        const double v = w.at(t, d);
        if (!std::isfinite(v)) throw InvalidArgument("fit_scaler: non-finite value");
        sum[d] += v;
      }
    }
    count += static_cast<std::size_t>(w.timesteps);
  }
  ZScoreScaler s;
  s.fitted_on = windows.size();
  s.mean.resize(D);
  s.std.resize(D);
  s.degenerate.assign(D, false);
  for (int d = 0; d < D; ++d) s.mean[d] = sum[d] / static_cast<double>(count);
  // Second pass for a numerically stable variance.
  std::vector<double> ss(D, 0.0);
  for (const auto& w : windows) {
    for (int t = 0; t < w.timesteps; ++t) {
      for (int d = 0; d < D; ++d) {
        const double dv = w.at(t, d) - s.mean[d];
        ss[d] += dv * dv;
      }
    }
  }
  for (int d = 0; d < D; ++d) {
    const double sd = std::sqrt(ss[d] / static_cast<double>(count));
    if (sd < ZScoreScaler::kMinStd) {
      s.std[d] = ZScoreScaler::kMinStd;
      s.degenerate[d] = true;
    } else {
      s.std[d] = sd;
    }
  }
  return s;
}

SensorWindow apply_scaler(const ZScoreScaler& scaler, const SensorWindow& window) {
  if (static_cast<std::size_t>(window.channels) != scaler.mean.size()) {
    throw DimensionError("scaler fitted on a different channel count");
  }
  SensorWindow out = window;
  for (int t = 0; t < window.timesteps; ++t) {
    for (int d = 0; d < window.channels; ++d) {
      out.at(t, d) = (window.at(t, d) - scaler.mean[d]) / scaler.std[d];
    }
  }
  return out;
}

SensorWindow inverse_scaler(const ZScoreScaler& scaler, const SensorWindow& window) {
  if (static_cast<std::size_t>(window.channels) != scaler.mean.size()) {
    throw DimensionError("scaler fitted on a different channel count");
  }
  SensorWindow out = window;
  for (int t = 0; t < window.timesteps; ++t) {
    for (int d = 0; d < window.channels; ++d) {
      out.at(t, d) = window.at(t, d) * scaler.std[d] + scaler.mean[d];
    }
  }
  return out;
}

ThermalFrame normalize_thermal(const ThermalNormalizer& n, const ThermalFrame& frame) {
  if (!(n.t_min < n.t_max)) throw InvalidArgument("thermal normalizer needs t_min < t_max");
  ThermalFrame out = frame;
  const double range = n.t_max - n.t_min;
  for (double& p : out.pixels) p = std::clamp((p - n.t_min) / range, 0.0, 1.0);
  return out;
}

SensorWindow time_warp(const SensorWindow& window, double knot_shift) {
  const int T = window.timesteps;
  if (T < 3 || knot_shift == 0.0) return window;
  const double last = T - 1;
  const double mid = 0.5 * last;
  // Keep the knot strictly inside so the warp stays monotone.
  const double knot = std::clamp(mid + knot_shift, 0.5, last - 0.5);
  SensorWindow out = window;
  for (int t = 0; t < T; ++t) {
    // Map output time t to a source position.
    double src = t <= mid ? t * knot / mid : knot + (t - mid) * (last - knot) / (last - mid);
    src = std::clamp(src, 0.0, last);
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, T - 1);
    const double frac = src - lo;
    for (int d = 0; d < window.channels; ++d) {
      out.at(t, d) = (1.0 - frac) * window.at(lo, d) + frac * window.at(hi, d);
    }
  }
  return out;
}

SensorWindow augment_sensor(const SensorWindow& window, Rng& rng,
                            const SensorAugmentConfig& config) {
  SensorWindow out = window;
  const double sigma = config.noise_is_variance ? std::sqrt(std::max(config.noise, 0.0))
                                                : std::max(config.noise, 0.0);
  if (sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& v : out.values) v += gauss(rng);
  }
  if (config.warp_prob > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < config.warp_prob) {
      const double shift = (2.0 * unit(rng) - 1.0) * config.warp_max_shift * window.timesteps;
      out = time_warp(out, shift);
    }
  }
  return out;
}

ThermalFrame flip_horizontal(const ThermalFrame& frame) {
  ThermalFrame out = frame;
  for (int r = 0; r < frame.height; ++r) {
    for (int c = 0; c < frame.width; ++c) out.at(r, c) = frame.at(r, frame.width - 1 - c);
  }
  if (frame.hotspot) {
    const auto& b = *frame.hotspot;
    out.hotspot = HotspotBox{b.row0, frame.width - b.col1, b.row1, frame.width - b.col0};
  }
  return out;
}

ThermalFrame rotate(const ThermalFrame& frame, double degrees) {
  if (degrees == 0.0) return frame;
  const int H = frame.height;
  const int W = frame.width;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cr = 0.5 * (H - 1);
  const double cc = 0.5 * (W - 1);
  ThermalFrame out = frame;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      // Inverse mapping: sample the source at the point rotated by -theta.
      const double dr = r - cr;
      const double dc = c - cc;
      const double sr = std::clamp(cr + cs * dr - sn * dc, 0.0, H - 1.0);
      const double sc = std::clamp(cc + sn * dr + cs * dc, 0.0, W - 1.0);
      const int r0 = static_cast<int>(std::floor(sr));
      const int c0 = static_cast<int>(std::floor(sc));
      const int r1 = std::min(r0 + 1, H - 1);
      const int c1 = std::min(c0 + 1, W - 1);
      const double fr = sr - r0;
      const double fc = sc - c0;
      out.at(r, c) = (1 - fr) * ((1 - fc) * frame.at(r0, c0) + fc * frame.at(r0, c1)) +
                     fr * ((1 - fc) * frame.at(r1, c0) + fc * frame.at(r1, c1));
    }
  }
  if (frame.hotspot) {
    const auto& b = *frame.hotspot;
    // Forward-rotate the box corners (pixel edges) and take their bounds.
    double rmin = H, rmax = 0, cmin = W, cmax = 0;
    for (double pr : {b.row0 - 0.5, b.row1 - 0.5}) {
      for (double pc : {b.col0 - 0.5, b.col1 - 0.5}) {
        const double dr = pr - cr;
        const double dc = pc - cc;
        const double rr = cr + cs * dr + sn * dc;
        const double rc = cc - sn * dr + cs * dc;
        rmin = std::min(rmin, rr);
        rmax = std::max(rmax, rr);
        cmin = std::min(cmin, rc);
        cmax = std::max(cmax, rc);
      }
    }
    HotspotBox nb{std::clamp(static_cast<int>(std::floor(rmin + 0.5)), 0, H - 1),
                  std::clamp(static_cast<int>(std::floor(cmin + 0.5)), 0, W - 1),
                  std::clamp(static_cast<int>(std::ceil(rmax + 0.5)), 1, H),
                  std::clamp(static_cast<int>(std::ceil(cmax + 0.5)), 1, W)};
    nb.row1 = std::max(nb.row1, nb.row0 + 1);
    nb.col1 = std::max(nb.col1, nb.col0 + 1);
    out.hotspot = nb;
  }
  return out;
}

ThermalFrame jitter_intensity(const ThermalFrame& frame, double brightness, double contrast) {
  ThermalFrame out = frame;
  double mean = 0.0;
  for (double p : frame.pixels) mean += brightness * p;
  mean /= static_cast<double>(frame.pixels.size());
  for (double& p : out.pixels) p = mean + contrast * (brightness * p - mean);
  return out;
}

ThermalFrame augment_thermal(const ThermalFrame& frame, Rng& rng,
                             const ThermalAugmentConfig& config) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ThermalFrame out = frame;
  if (config.flip_prob > 0.0 && unit(rng) < config.flip_prob) out = flip_horizontal(out);
  if (config.max_rotation_deg > 0.0) {
    out = rotate(out, (2.0 * unit(rng) - 1.0) * config.max_rotation_deg);
  }
  if (config.jitter > 0.0) {
    const double brightness = 1.0 + (2.0 * unit(rng) - 1.0) * config.jitter;
    const double contrast = 1.0 + (2.0 * unit(rng) - 1.0) * config.jitter;
    out = jitter_intensity(out, brightness, contrast);
  }
  return out;
}

SensorWindow inject_noise(const SensorWindow& window, double sigma, Rng& rng) {
  if (sigma < 0.0) throw InvalidArgument("noise sigma must be >= 0");
  SensorWindow out = window;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> gauss(0.0, sigma);
  for (double& v : out.values) v += gauss(rng);
  return out;
}

Sample corrupt_modality(const Sample& sample, Modality which) {
  Sample out = sample;
  if (which == Modality::Sensor) {
    std::fill(out.sensors.values.begin(), out.sensors.values.end(), 0.0);
  } else {
    std::fill(out.thermal.pixels.begin(), out.thermal.pixels.end(), 0.0);
  }
  return out;
}

}  // namespace cascade
