#pragma once

#include <vector>

#include "cascade/neuralkit/layers.hpp"

namespace cascade::nk {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Decoupled weight decay: theta -= lr * wd * theta, then the Adam step.
class AdamW {
 public:
  AdamW(ParameterList params, AdamWConfig config = {});

  void step();
  void zero_grad() { zero_grads(params_); }
  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  long step_count() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  ParameterList params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

// base_lr * (1 + cos(pi * t / horizon)) / 2, clamped to 0 past the horizon.
double cosine_lr(double base_lr, double t, double horizon);

}  // namespace cascade::nk
