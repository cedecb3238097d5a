#pragma once

#include <complex>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cascade/core/types.hpp"

namespace cascade {

struct FeatureVector {
  std::vector<double> values;
  std::vector<std::string> names;
};

// Row-major [rows x cols] design matrix with named columns.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<std::string> names;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c, std::vector<std::string> column_names = {});

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }

  void append(const FeatureVector& v);
  FeatureMatrix select_rows(std::span<const std::size_t> rows_to_keep) const;
};

// Statistic order inside each channel block.
inline constexpr std::string_view kStatNames[4] = {"mean", "std", "min", "max"};

// Per channel: mean, population std (divisor T), min, max. Channel-major,
// named "<channel>_<stat>". Length 4 * D.
FeatureVector extract_statistical(const SensorWindow& window);

// Statistical features for many windows at once.
FeatureMatrix extract_statistical(std::span<const SensorWindow> windows);

// 32 vibration features over four groups (artifact feature set v1):
//   time      mean std min max rms kurtosis crest_factor shape_factor
//   spectrum  mean std peak_hz centroid_hz      (one-sided |DFT|, DC excluded)
//   envelope  mean std peak_hz centroid_hz      (|DFT| of the analytic envelope)
//   moments   q1 q2 q3 variance energy zcr band_0..band_9
// Kurtosis is non-excess (Gaussian -> 3). Band features are log energies in
// ten equal-width bands of the one-sided spectrum.
FeatureVector extract_vibration_multidomain(std::span<const double> signal, double sample_rate);

inline constexpr std::string_view kVibrationFeatureSetVersion = "artifact feature set v1";

// In-place-free radix-2 transforms. Input length must be a power of two.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> input);
std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> input);

std::size_t next_pow2(std::size_t n);

// Header row of names, then one row per sample.
void write_feature_csv(std::ostream& out, const FeatureMatrix& m);

}  // namespace cascade
