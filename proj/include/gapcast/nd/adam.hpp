#pragma once

#include <cstdint>
#include <vector>

#include "gapcast/nd/tensor.hpp"

namespace gapcast::nd {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // L2 penalty: weight_decay * w is added to the gradient before the moment updates.
  double weight_decay = 0.0;
};

enum class StepStatus { applied, non_finite_gradient };

/// Adam with bias correction. Moment buffers are bound to the parameter list
/// given at construction and must keep matching shapes.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  /// Applies one update from the accumulated gradients. If any gradient is
  /// non-finite nothing is modified and the step counter does not advance.
  StepStatus step();
  void zero_grad();
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace gapcast::nd
