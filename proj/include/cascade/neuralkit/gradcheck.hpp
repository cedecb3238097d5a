#pragma once

#include <functional>
#include <string>

#include "cascade/neuralkit/layers.hpp"

namespace cascade::nk {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative errors use max(|analytic|, |numeric|, floor) as denominator, so
  // near-zero gradients are compared in absolute terms.
  double floor = 1e-6;
  // Entries checked per parameter; 0 checks all of them.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
  bool passed = false;
};

// Compares autodiff gradients of loss_fn() with central finite differences.
// loss_fn must be deterministic (dropout off).
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, const ParameterList& params,
                           const GradCheckOptions& options = {});

}  // namespace cascade::nk
