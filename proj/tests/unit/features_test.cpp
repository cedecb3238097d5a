#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cascade/common/error.hpp"
#include "cascade/core/types.hpp"
#include "cascade/features/features.hpp"

namespace cascade {
namespace {

double feature(const FeatureVector& f, const std::string& name) {
  for (std::size_t i = 0; i < f.names.size(); ++i)
    if (f.names[i] == name) return f.values[i];
  ADD_FAILURE() << "missing feature " << name;
  return 0.0;
}

SensorWindow random_window(int t, int d, std::uint64_t seed) {
  SensorWindow w(t, d, default_channel_names(d));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 2.0);
  for (auto& v : w.values) v = n(rng);
  return w;
}

TEST(Statistical, ReferenceChannels) {
  SensorWindow w(3, 2, {"a", "b"});
  for (int t = 0; t < 3; ++t) {
    w.at(t, 0) = 1.0;
    w.at(t, 1) = t + 1.0;
  }
  auto f = extract_statistical(w);
  ASSERT_EQ(f.values.size(), 8u);
  EXPECT_EQ(f.values[0], 1.0);
  EXPECT_EQ(f.values[1], 0.0);
  EXPECT_EQ(f.values[2], 1.0);
  EXPECT_EQ(f.values[3], 1.0);
  EXPECT_NEAR(f.values[4], 2.0, 1e-12);
  EXPECT_NEAR(f.values[5], 0.816497, 1e-6);
  EXPECT_EQ(f.values[6], 1.0);
  EXPECT_EQ(f.values[7], 3.0);
  EXPECT_EQ(f.names[5], "b_std");
}

TEST(Statistical, DefaultLayoutHas32NamedFeatures) {
  auto f = extract_statistical(random_window(20, 8, 1));
  ASSERT_EQ(f.values.size(), 32u);
  EXPECT_EQ(f.names[0], "ntc_mean");
  EXPECT_EQ(f.names[3], "ntc_max");
  EXPECT_EQ(f.names[4], "pm10_mean");
  EXPECT_EQ(f.names[31], "ct4_max");
}

TEST(Statistical, ShiftScaleAndPermutation) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto w = random_window(15, 3, trial);
    auto base = extract_statistical(w);
    const double c = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
    const double k = std::uniform_real_distribution<double>(0.1, 4.0)(rng);
    auto shifted = w, scaled = w;
    for (auto& v : shifted.values) v += c;
    for (auto& v : scaled.values) v *= k;
    auto fs = extract_statistical(shifted), fk = extract_statistical(scaled);
    for (int d = 0; d < 3; ++d) {
      EXPECT_NEAR(fs.values[4 * d + 0], base.values[4 * d + 0] + c, 1e-9);
      EXPECT_NEAR(fs.values[4 * d + 1], base.values[4 * d + 1], 1e-9);
      EXPECT_NEAR(fs.values[4 * d + 2], base.values[4 * d + 2] + c, 1e-9);
      EXPECT_NEAR(fs.values[4 * d + 3], base.values[4 * d + 3] + c, 1e-9);
      for (int s = 0; s < 4; ++s) EXPECT_NEAR(fk.values[4 * d + s], k * base.values[4 * d + s], 1e-9);
    }
    // Reverse time.
    auto reversed = w;
    for (int t = 0; t < 15; ++t)
      for (int d = 0; d < 3; ++d) reversed.at(t, d) = w.at(14 - t, d);
    auto fr = extract_statistical(reversed);
    for (std::size_t i = 0; i < base.values.size(); ++i) EXPECT_NEAR(fr.values[i], base.values[i], 1e-12);
  }
}

TEST(Statistical, MatrixAndCsv) {
  std::vector<SensorWindow> ws{random_window(5, 2, 1), random_window(5, 2, 2)};
  auto m = extract_statistical(ws);
  EXPECT_EQ(m.rows, 2u);
  EXPECT_EQ(m.cols, 8u);
  EXPECT_EQ(m.at(1, 0), extract_statistical(ws[1]).values[0]);
  std::ostringstream out;
  write_feature_csv(out, m);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "ntc_mean,ntc_std,ntc_min,ntc_max,pm10_mean,pm10_std,pm10_min,pm10_max");
  auto w = random_window(5, 2, 3);
  w.values[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(extract_statistical(w), InvalidArgument);
}

TEST(Vibration, SineClosedForm) {
  const int n = 1024;
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) s[i] = std::sin(2.0 * std::numbers::pi * 16.0 * i / n);
  auto f = extract_vibration_multidomain(s, 1024.0);
  ASSERT_EQ(f.values.size(), 32u);
  EXPECT_NEAR(feature(f, "vib_crest_factor"), std::sqrt(2.0), 1e-3);
  EXPECT_NEAR(feature(f, "vib_rms"), 1.0 / std::sqrt(2.0), 1e-3);
  EXPECT_NEAR(feature(f, "vib_spectrum_peak_hz"), 16.0, 1e-9);
}

TEST(Vibration, AlternatingZeroCrossings) {
  std::vector<double> s(64);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i % 2 == 0 ? 1.0 : -1.0;
  EXPECT_DOUBLE_EQ(feature(extract_vibration_multidomain(s, 100.0), "vib_zcr"), 1.0);
}

TEST(Vibration, GaussianKurtosis) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(100000);
  for (auto& v : s) v = n(rng);
  EXPECT_NEAR(feature(extract_vibration_multidomain(s, 1000.0), "vib_kurtosis"), 3.0, 0.1);
}

TEST(Vibration, Errors) {
  std::vector<double> shortsig(63, 1.0);
  EXPECT_THROW(extract_vibration_multidomain(shortsig, 10.0), InvalidArgument);
  std::vector<double> silent(128, 0.0);
  EXPECT_THROW(extract_vibration_multidomain(silent, 10.0), InvalidArgument);
}

TEST(Fft, RoundTrip) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t len : {1u, 2u, 8u, 256u, 4096u}) {
    std::vector<std::complex<double>> x(len);
    for (auto& v : x) v = {n(rng), n(rng)};
    auto back = ifft(fft(x));
    for (std::size_t i = 0; i < len; ++i) EXPECT_LT(std::abs(back[i] - x[i]), 1e-9);
  }
  std::vector<std::complex<double>> bad(6);
  EXPECT_THROW(fft(bad), InvalidArgument);
  EXPECT_EQ(next_pow2(1000), 1024u);
  EXPECT_EQ(next_pow2(1024), 1024u);
}

TEST(Fft, MatchesDirectDft) {
  std::vector<std::complex<double>> x{{1, 0}, {2, -1}, {0, 3}, {-1, 0.5}};
  auto X = fft(x);
  for (std::size_t k = 0; k < 4; ++k) {
    std::complex<double> s{0, 0};
    for (std::size_t t = 0; t < 4; ++t)
      s += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / 4.0);
    EXPECT_LT(std::abs(X[k] - s), 1e-12);
  }
}

}  // namespace
}  // namespace cascade
