#include "cascade/neuralkit/optim.hpp"

#include <cmath>
#include <numbers>

namespace cascade::nk {

AdamW::AdamW(ParameterList params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i].tensor;
    auto theta = p.values();
    const auto& grad = p.node()->grad;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      double g = grad.empty() ? 0.0 : grad[j];
      theta[j] -= config_.lr * config_.weight_decay * theta[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      theta[j] -= config_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

double cosine_lr(double base_lr, double t, double horizon) {
  if (horizon <= 0.0 || t >= horizon) return 0.0;
  if (t <= 0.0) return base_lr;
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t / horizon));
}

}  // namespace cascade::nk
