#include "gapcast/baselines/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "gapcast/nd/adam.hpp"
#include "gapcast/nd/ops.hpp"

namespace gapcast::baselines {
namespace {

void check_windows(std::span<const PixelWindow> windows, std::size_t p) {
  if (p == 0) throw std::invalid_argument("AR order must be positive");
  for (const auto& w : windows) {
    if (w.history.size() < p) {
      throw std::invalid_argument("window with " + std::to_string(w.history.size()) + " inputs cannot fit AR(" +
                                  std::to_string(p) + ")");
    }
  }
}

// Lag-i regressor of a window: x_{t-i} for i = 1..p.
double lag(const PixelWindow& w, std::size_t i) { return w.history[w.history.size() - i]; }

}  // namespace

Grid last_scene_forecast(std::span<const Grid> inputs) {
  if (inputs.empty()) throw std::invalid_argument("last-scene forecast needs at least one input scene");
  return inputs.back();
}

Grid all_zeros_forecast(std::size_t height, std::size_t width) { return Grid(height, width, 0.0); }

std::vector<PixelWindow> pixel_windows(std::span<const Grid> inputs, const Grid& target) {
  for (const auto& g : inputs) {
    if (!g.same_shape(target)) throw std::invalid_argument("input and target scenes differ in shape");
  }
  std::vector<PixelWindow> out(target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    out[k].history.reserve(inputs.size());
    for (const auto& g : inputs) out[k].history.push_back(g.values[k]);
    out[k].target = target.values[k];
  }
  return out;
}

ARModel ar_fit_closed_form(std::span<const PixelWindow> windows, std::size_t p, const ClosedFormOptions& options) {
  check_windows(windows, p);
  if (windows.size() < p + 1) {
    throw std::invalid_argument("closed-form AR(" + std::to_string(p) + ") fit needs at least " +
                                std::to_string(p + 1) + " windows");
  }
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd aty = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::VectorXd row(static_cast<Eigen::Index>(p));
  for (const auto& w : windows) {
    for (std::size_t i = 0; i < p; ++i) row[static_cast<Eigen::Index>(i)] = lag(w, i + 1);
    ata.selfadjointView<Eigen::Lower>().rankUpdate(row);
    aty += w.target * row;
  }
  ata = ata.selfadjointView<Eigen::Lower>();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ata);
  const auto& s = svd.singularValues();
  const double smax = s[0];
  const double smin = s[s.size() - 1];
  const double condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  Eigen::VectorXd phi;
  if (!(condition <= options.max_condition)) {
    if (!options.allow_rank_deficient) {
      throw SingularSystemError("AR normal matrix is singular or ill-conditioned (condition " +
                                    std::to_string(condition) + ", largest singular value " + std::to_string(smax) +
                                    ", smallest " + std::to_string(smin) + ")",
                                condition);
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(ata);
    cod.setThreshold(1.0 / options.max_condition);
    phi = cod.solve(aty);
  } else {
    phi = ata.ldlt().solve(aty);
  }
  return {std::vector<double>(phi.data(), phi.data() + phi.size())};
}

ARModel ar_fit_gradient(std::span<const PixelWindow> windows, std::size_t p, const GradientFitOptions& options) {
  check_windows(windows, p);
  if (windows.empty()) throw std::invalid_argument("gradient AR fit needs at least one window");
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  auto w = nd::Tensor::zeros({1, p}, true);
  nd::Adam opt({w}, {.learning_rate = options.learning_rate, .weight_decay = options.weight_decay});
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t b = std::min(options.batch_size, order.size() - start);
      auto x = nd::Tensor::zeros({p, b});
      auto y = nd::Tensor::zeros({1, b});
      for (std::size_t j = 0; j < b; ++j) {
        const auto& win = windows[order[start + j]];
        for (std::size_t i = 0; i < p; ++i) x.data()[i * b + j] = lag(win, i + 1);
        y.data()[j] = win.target;
      }
      opt.zero_grad();
      nd::Graph g;
      g.backward(nd::mse_loss(g, nd::affine(g, x, w), y));
      if (opt.step() != nd::StepStatus::applied) {
        throw std::runtime_error("non-finite gradient while fitting AR model in epoch " + std::to_string(epoch + 1));
      }
    }
  }
  return {std::vector<double>(w.data().begin(), w.data().end())};
}

ARModel ar_fit(std::span<const PixelWindow> windows, std::size_t p, FitMethod method) {
  return method == FitMethod::closed_form ? ar_fit_closed_form(windows, p) : ar_fit_gradient(windows, p);
}

double ar_training_mse(const ARModel& model, std::span<const PixelWindow> windows) {
  check_windows(windows, model.order());
  if (windows.empty()) throw std::invalid_argument("no windows to score");
  double acc = 0.0;
  for (const auto& w : windows) {
    double pred = 0.0;
    for (std::size_t i = 0; i < model.order(); ++i) pred += model.phi[i] * lag(w, i + 1);
    acc += (pred - w.target) * (pred - w.target);
  }
  return acc / static_cast<double>(windows.size());
}

Grid ar_forecast(const ARModel& model, std::span<const Grid> inputs) {
  const std::size_t p = model.order();
  if (p == 0) throw std::invalid_argument("AR model has no coefficients");
  if (inputs.size() < p) {
    throw std::invalid_argument("AR(" + std::to_string(p) + ") forecast needs " + std::to_string(p) +
                                " scenes, got " + std::to_string(inputs.size()));
  }
  const Grid& last = inputs.back();
  for (const auto& g : inputs) {
    if (!g.same_shape(last)) throw std::invalid_argument("AR forecast inputs differ in shape");
  }
  Grid out(last.height, last.width);
  for (std::size_t k = 0; k < last.size(); ++k) {
    double acc = model.phi[0] * last.values[k];
    for (std::size_t i = 1; i < p; ++i) acc += model.phi[i] * inputs[inputs.size() - 1 - i].values[k];
    out.values[k] = acc;
  }
  return out;
}

}  // namespace gapcast::baselines
