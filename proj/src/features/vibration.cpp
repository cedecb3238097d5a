#include <algorithm>
#include <cmath>
#include <numbers>

#include "cascade/common/error.hpp"
#include "cascade/common/math.hpp"
#include "cascade/features/features.hpp"

namespace cascade {
namespace {

using cplx = std::complex<double>;

std::vector<cplx> transform(std::span<const cplx> input, bool inverse) {
  const std::size_t n = input.size();
  if (n == 0 || (n & (n - 1)) != 0) throw InvalidArgument("FFT length must be a power of two");
  std::vector<cplx> a(input.begin(), input.end());
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1 : -1);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Direct twiddle evaluation avoids accumulated rounding from a
        // running product.
        const cplx w = std::polar(1.0, angle * static_cast<double>(k));
        const cplx u = a[start + k];
        const cplx v = a[start + k + len / 2] * w;
        a[start + k] = u + v;
        a[start + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
  return a;
}

struct SpectrumStats {
  double mean;
  double std;
  double peak_hz;
  double centroid_hz;
};

// One-sided magnitude statistics over bins 1..N/2 (DC excluded).
SpectrumStats spectrum_stats(std::span<const cplx> spectrum, double sample_rate) {
  const std::size_t n = spectrum.size();
  const std::size_t half = n / 2;
  std::vector<double> mag;
  mag.reserve(half);
  for (std::size_t k = 1; k <= half; ++k) mag.push_back(std::abs(spectrum[k]));
  const double bin_hz = sample_rate / static_cast<double>(n);
  double sum = 0.0, weighted = 0.0;
  std::size_t peak = 0;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    sum += mag[i];
    weighted += mag[i] * static_cast<double>(i + 1) * bin_hz;
    if (mag[i] > mag[peak]) peak = i;
  }
  const double mean = sum / static_cast<double>(mag.size());
  double ss = 0.0;
  for (double m : mag) ss += (m - mean) * (m - mean);
  return {mean, std::sqrt(ss / static_cast<double>(mag.size())),
          static_cast<double>(peak + 1) * bin_hz, sum > 0.0 ? weighted / sum : 0.0};
}

std::vector<cplx> padded(std::span<const double> x, std::size_t n) {
  std::vector<cplx> out(n, cplx(0.0, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = cplx(x[i], 0.0);
  return out;
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<cplx> fft(std::span<const cplx> input) { return transform(input, false); }
std::vector<cplx> ifft(std::span<const cplx> input) { return transform(input, true); }

FeatureVector extract_vibration_multidomain(std::span<const double> signal, double sample_rate) {
  const std::size_t n = signal.size();
  if (n < 64) throw InvalidArgument("vibration signal needs at least 64 samples");
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample_rate must be positive");

  FeatureVector f;
  auto emit = [&](const std::string& name, double v) {
    f.names.push_back("vib_" + name);
    f.values.push_back(v);
  };

  // Time domain.
  const double mean = mean_of(signal);
  double m2 = 0.0, m4 = 0.0, energy = 0.0, abs_sum = 0.0, peak_abs = 0.0;
  double lo = signal[0], hi = signal[0];
  for (double x : signal) {
    if (!std::isfinite(x)) throw InvalidArgument("vibration signal contains a non-finite value");
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
    energy += x * x;
    abs_sum += std::abs(x);
    peak_abs = std::max(peak_abs, std::abs(x));
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (energy == 0.0) throw InvalidArgument("zero-energy signal: crest and shape factors undefined");
  const double dn = static_cast<double>(n);
  const double variance = m2 / dn;
  const double rms = std::sqrt(energy / dn);
  emit("mean", mean);
  emit("std", std::sqrt(variance));
  emit("min", lo);
  emit("max", hi);
  emit("rms", rms);
  emit("kurtosis", variance > 0.0 ? (m4 / dn) / (variance * variance) : 0.0);
  emit("crest_factor", peak_abs / rms);
  emit("shape_factor", rms / (abs_sum / dn));

  // Frequency domain.
  const std::size_t nfft = next_pow2(n);
  const auto spectrum = fft(padded(signal, nfft));
  const auto spec = spectrum_stats(spectrum, sample_rate);
  emit("spectrum_mean", spec.mean);
  emit("spectrum_std", spec.std);
  emit("spectrum_peak_hz", spec.peak_hz);
  emit("spectrum_centroid_hz", spec.centroid_hz);

  // Envelope spectrum: analytic signal built in the frequency domain.
  std::vector<cplx> analytic_spec = spectrum;
  for (std::size_t k = 1; k < nfft / 2; ++k) analytic_spec[k] *= 2.0;
  for (std::size_t k = nfft / 2 + 1; k < nfft; ++k) analytic_spec[k] = 0.0;
  const auto analytic = ifft(analytic_spec);
  std::vector<double> envelope(n);
  for (std::size_t i = 0; i < n; ++i) envelope[i] = std::abs(analytic[i]);
  const double env_mean = mean_of(envelope);
  for (double& e : envelope) e -= env_mean;
  const auto env = spectrum_stats(fft(padded(envelope, nfft)), sample_rate);
  emit("envelope_mean", env.mean);
  emit("envelope_std", env.std);
  emit("envelope_peak_hz", env.peak_hz);
  emit("envelope_centroid_hz", env.centroid_hz);

  // Distributional moments.
  std::vector<double> sorted(signal.begin(), signal.end());
  std::sort(sorted.begin(), sorted.end());
  emit("q1", quantile_sorted(sorted, 0.25));
  emit("q2", quantile_sorted(sorted, 0.50));
  emit("q3", quantile_sorted(sorted, 0.75));
  emit("variance", variance);
  emit("energy", energy);
  std::size_t crossings = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if ((signal[i] < 0.0 && signal[i + 1] > 0.0) || (signal[i] > 0.0 && signal[i + 1] < 0.0)) {
      ++crossings;
    }
  }
  emit("zcr", static_cast<double>(crossings) / static_cast<double>(n - 1));

  constexpr int kBands = 10;
  const std::size_t half = nfft / 2;
  std::array<double, kBands> band{};
  for (std::size_t k = 1; k <= half; ++k) {
    const auto b = std::min<std::size_t>((k - 1) * kBands / half, kBands - 1);
    band[b] += std::norm(spectrum[k]);
  }
  for (int b = 0; b < kBands; ++b) emit("band_" + std::to_string(b), std::log(band[b] + 1e-12));
  return f;
}

}  // namespace cascade
