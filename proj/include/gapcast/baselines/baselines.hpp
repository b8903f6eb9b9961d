#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapcast/core/grid.hpp"

namespace gapcast::baselines {

/// Returns the most recent input unchanged. Inputs are oldest first.
Grid last_scene_forecast(std::span<const Grid> inputs);
Grid all_zeros_forecast(std::size_t height, std::size_t width);

/// x_t = sum_i phi_i x_{t-i}, no intercept. phi[0] weights the most recent scene.
/// One coefficient vector is shared by every pixel.
struct ARModel {
  std::vector<double> phi;
  std::size_t order() const { return phi.size(); }
};

/// One pixel's history (oldest first, at least p values) and the value that followed.
struct PixelWindow {
  std::vector<double> history;
  double target = 0.0;
};

/// One window per pixel from a scene sequence and its target scene.
std::vector<PixelWindow> pixel_windows(std::span<const Grid> inputs, const Grid& target);

class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double condition) : std::runtime_error(what), condition_(condition) {}
  /// Ratio of largest to smallest singular value of the normal matrix (inf when exactly singular).
  double condition() const { return condition_; }

 private:
  double condition_;
};

struct ClosedFormOptions {
  // Normal matrices with condition above this are treated as singular.
  double max_condition = 1e12;
  // Return the minimum-norm least-squares solution instead of rejecting.
  bool allow_rank_deficient = false;
};

struct GradientFitOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

enum class FitMethod { closed_form, gradient };

ARModel ar_fit_closed_form(std::span<const PixelWindow> windows, std::size_t p, const ClosedFormOptions& options = {});
ARModel ar_fit_gradient(std::span<const PixelWindow> windows, std::size_t p, const GradientFitOptions& options = {});
ARModel ar_fit(std::span<const PixelWindow> windows, std::size_t p, FitMethod method);

/// Mean squared one-step error of the model over the windows.
double ar_training_mse(const ARModel& model, std::span<const PixelWindow> windows);

/// Per-pixel linear combination of the last p inputs (oldest first).
Grid ar_forecast(const ARModel& model, std::span<const Grid> inputs);

}  // namespace gapcast::baselines
