#include "cascade/neuralkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cascade/common/error.hpp"

namespace cascade::nk {

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParameterList& params,
                           const GradCheckOptions& options) {
  zero_grads(params);
  Tensor loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    analytic.push_back(p.tensor.grad());
    for (double g : analytic.back()) {
      if (!std::isfinite(g)) throw Error("grad_check: non-finite gradient in " + p.name);
    }
  }
  zero_grads(params);

  GradCheckReport report;
  Rng rng = make_rng(options.seed, 0x9c);
  NoGradGuard guard;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = params[pi].tensor;
    auto theta = t.values();
    std::vector<std::size_t> idx(theta.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_entries > 0 && idx.size() > options.max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.max_entries);
    }
    for (std::size_t j : idx) {
      double saved = theta[j];
      theta[j] = saved + options.step;
      double up = loss_fn().item();
      theta[j] = saved - options.step;
      double down = loss_fn().item();
      theta[j] = saved;
      double numeric = (up - down) / (2.0 * options.step);
      double a = analytic[pi][j];
      double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      double rel = std::abs(a - numeric) / denom;
      ++report.entries_checked;
      if (rel >= report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = params[pi].name;
        report.worst_index = j;
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace cascade::nk
