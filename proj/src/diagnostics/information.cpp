#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "cascade/common/error.hpp"
#include "cascade/common/math.hpp"
#include "cascade/diagnostics/diagnostics.hpp"
#include "cascade/neuralkit/ops.hpp"

namespace cascade {

MiEstimate mutual_information_discrete(std::span<const int> labels, std::span<const int> z) {
  if (labels.size() != z.size()) throw DimensionError("labels and codes differ in length");
  if (labels.empty()) throw InvalidArgument("mutual information needs samples");
  MiEstimate est;
  est.small_sample = labels.size() < kMiSmallSample;
  std::map<int, double> py, pz;
  std::map<std::pair<int, int>, double> pyz;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    py[labels[i]] += 1.0;
    pz[z[i]] += 1.0;
    pyz[{labels[i], z[i]}] += 1.0;
  }
  if (py.size() < 2) {
    est.single_class = true;
    return est;
  }
  const double n = static_cast<double>(labels.size());
  double bits = 0.0;
  for (const auto& [key, count] : pyz) {
    bits += count / n * std::log2(count * n / (py[key.first] * pz[key.second]));
  }
  est.bits = std::max(bits, 0.0);
  return est;
}

std::vector<int> quantile_bins(std::span<const double> values, std::size_t n_bins) {
  if (n_bins < 1) throw InvalidArgument("need at least one bin");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (std::size_t k = 1; k < n_bins; ++k)
    edges.push_back(quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(n_bins)));
  std::vector<int> bins(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    bins[i] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
  return bins;
}

MiEstimate mutual_information(std::span<const int> labels, std::span<const double> features,
                              std::size_t dims, std::size_t n_bins) {
  if (dims == 0) throw InvalidArgument("features need at least one dimension");
  if (features.size() != labels.size() * dims) throw DimensionError("feature matrix size mismatch");
  const std::size_t n = labels.size();
  if (dims == 1) return mutual_information_discrete(labels, quantile_bins(features, n_bins));

  Eigen::MatrixXd codes(n, dims);
  std::vector<double> column(n);
  for (std::size_t d = 0; d < dims; ++d) {
    for (std::size_t i = 0; i < n; ++i) column[i] = features[i * dims + d];
    auto b = quantile_bins(column, n_bins);
    for (std::size_t i = 0; i < n; ++i) codes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = b[i];
  }
  Eigen::RowVectorXd mean = codes.colwise().mean();
  codes.rowwise() -= mean;
  Eigen::MatrixXd cov = codes.transpose() * codes;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Eigen::VectorXd direction = solver.eigenvectors().col(static_cast<Eigen::Index>(dims) - 1);
  Eigen::VectorXd projection = codes * direction;
  std::vector<double> proj(projection.data(), projection.data() + n);
  return mutual_information_discrete(labels, quantile_bins(proj, n_bins));
}

namespace {

double squared_grad_norm(const nk::ParameterList& params) {
  double s = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw Error("non-finite gradient in " + p.name);
      s += g * g;
    }
  }
  return s;
}

ModalityGsr finish(double norm, const MiEstimate& mi) {
  ModalityGsr m;
  m.gradient_norm = norm;
  m.mi_bits = mi.bits;
  m.mi_floored = mi.bits < kMiFloorBits;
  m.ratio = norm / std::max(mi.bits, kMiFloorBits);
  return m;
}

}  // namespace

GsrReport gsr(const baselines::FusionModel& model, const baselines::PreparedData& data,
              std::span<const std::size_t> idx, std::size_t batch_size, std::size_t n_bins) {
  if (idx.empty()) throw InvalidArgument("gsr needs samples");
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (!nk::grad_enabled()) throw Error("gsr needs gradient recording enabled");
  const auto all = model.parameters();
  const auto sensor_params = model.sensor_encoder_parameters();
  const auto thermal_params = model.thermal_encoder_parameters();
  Rng unused(0);
  double sensor_norm = 0.0, thermal_norm = 0.0;
  std::size_t batches = 0;
  std::vector<double> cs, ct;
  std::size_t ds = 0, dt = 0;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    auto rows = idx.subspan(start, std::min(batch_size, idx.size() - start));
    nk::zero_grads(all);
    auto fwd = model.forward(baselines::make_batch(model, data, rows), false, unused);
    nk::Tensor loss = nk::cross_entropy(fwd.logits, baselines::label_batch(data, rows));
    if (loss.requires_grad()) loss.backward();
    sensor_norm += std::sqrt(squared_grad_norm(sensor_params));
    thermal_norm += std::sqrt(squared_grad_norm(thermal_params));
    ++batches;
    ds = fwd.sensor.context.dim(1);
    dt = fwd.thermal.context.dim(1);
    cs.insert(cs.end(), fwd.sensor.context.values().begin(), fwd.sensor.context.values().end());
    ct.insert(ct.end(), fwd.thermal.context.values().begin(), fwd.thermal.context.values().end());
  }
  nk::zero_grads(all);
  auto labels = baselines::label_batch(data, idx);
  GsrReport r;
  r.sensor = finish(sensor_norm / static_cast<double>(batches),
                    mutual_information(labels, cs, ds, n_bins));
  r.thermal = finish(thermal_norm / static_cast<double>(batches),
                     mutual_information(labels, ct, dt, n_bins));
  return r;
}

}  // namespace cascade
