#include "gapcast/nd/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gapcast::nd {

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (config_.weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
  if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

StepStatus Adam::step() {
  for (auto& p : params_) {
    if (!p.has_grad()) continue;
    for (double d : p.grad_view()) {
      if (!std::isfinite(d)) return StepStatus::non_finite_gradient;
    }
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (p.size() != m_[k].size()) throw std::logic_error("parameter shape changed under the optimizer");
    auto w = p.data();
    auto grad = p.has_grad() ? p.grad_view() : std::span<const double>{};
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = (grad.empty() ? 0.0 : grad[i]) + config_.weight_decay * w[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
  return StepStatus::applied;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace gapcast::nd
