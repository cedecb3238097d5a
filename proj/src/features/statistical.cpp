#include <algorithm>
#include <cmath>
#include <iomanip>

#include "cascade/common/error.hpp"
#include "cascade/features/features.hpp"

namespace cascade {

FeatureMatrix::FeatureMatrix(std::size_t r, std::size_t c, std::vector<std::string> column_names)
    : rows(r), cols(c), values(r * c, 0.0), names(std::move(column_names)) {}

void FeatureMatrix::append(const FeatureVector& v) {
  if (rows == 0 && cols == 0) {
    cols = v.values.size();
    names = v.names;
  }
  if (v.values.size() != cols) throw DimensionError("feature vector length mismatch");
  values.insert(values.end(), v.values.begin(), v.values.end());
  ++rows;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> keep) const {
  FeatureMatrix out(keep.size(), cols, names);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto src = row(keep[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

FeatureVector extract_statistical(const SensorWindow& window) {
  if (window.timesteps < 2) throw InvalidArgument("statistical features need T >= 2");
  const int T = window.timesteps;
  const int D = window.channels;
  FeatureVector f;
  f.values.reserve(static_cast<std::size_t>(4 * D));
  f.names.reserve(static_cast<std::size_t>(4 * D));
  for (int d = 0; d < D; ++d) {
    double sum = 0.0;
    double lo = window.at(0, d);
    double hi = lo;
    for (int t = 0; t < T; ++t) {
      const double v = window.at(t, d);
      if (!std::isfinite(v)) throw InvalidArgument("statistical features: non-finite input");
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / T;
    double ss = 0.0;
    for (int t = 0; t < T; ++t) {
      const double dv = window.at(t, d) - mean;
      ss += dv * dv;
    }
    f.values.insert(f.values.end(), {mean, std::sqrt(ss / T), lo, hi});
    const std::string channel = static_cast<std::size_t>(d) < window.channel_names.size()
                                    ? window.channel_names[d]
                                    : "ch" + std::to_string(d);
    for (auto stat : kStatNames) f.names.push_back(channel + "_" + std::string(stat));
  }
  return f;
}

FeatureMatrix extract_statistical(std::span<const SensorWindow> windows) {
  FeatureMatrix m;
  for (const auto& w : windows) m.append(extract_statistical(w));
  return m;
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
  for (std::size_t j = 0; j < m.names.size(); ++j) out << (j ? "," : "") << m.names[j];
  out << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) out << (j ? "," : "") << m.at(i, j);
    out << "\n";
  }
}

}  // namespace cascade
