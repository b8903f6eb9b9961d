#include "gapcast/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "gapcast/eval/eval.hpp"
#include "gapcast/nd/adam.hpp"
#include "gapcast/nd/ops.hpp"

namespace gapcast::train {

using dataset::Phase;
using dataset::Split;

double cosine_learning_rate(double base, double final_fraction, std::size_t step, std::size_t total_steps) {
  if (total_steps < 2) return base;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps - 1));
  return base * (final_fraction + (1.0 - final_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

TrainResult train_model(cells::Forecaster& model, dataset::SequenceStore& store, const pipeline::ScalerParams& scaler,
                        const TrainOptions& options) {
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (options.epochs == 0) throw std::invalid_argument("epochs must be at least 1");
  const std::size_t n = store.size(Split::train);
  if (n == 0) throw std::invalid_argument("no training sequences");
  if (!(options.final_lr_fraction > 0.0 && options.final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("final learning-rate fraction must lie in (0, 1]");
  }

  const auto params = model.parameters();
  std::vector<nd::Tensor> tensors;
  std::vector<nd::Tensor> constrained;
  for (auto p : params) {
    p.tensor.set_requires_grad(true);
    tensors.push_back(p.tensor);
    if (p.nonpositive) constrained.push_back(p.tensor);
  }
  nd::Adam opt(tensors, {.learning_rate = options.learning_rate, .weight_decay = options.weight_decay});
  const auto kind = model.spec().kind;

  const std::size_t total_steps = options.epochs * ((n + options.batch_size - 1) / options.batch_size);

  TrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  for (std::size_t epoch = 1; epoch <= options.epochs && !result.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t b = std::min(options.batch_size, n - start);
      opt.zero_grad();
      opt.set_learning_rate(cosine_learning_rate(options.learning_rate, options.final_lr_fraction, result.steps, total_steps));
      for (std::size_t j = 0; j < b; ++j) {
        const auto& seq = store.fetch(Split::train, order[start + j], Phase::gradient);
        nd::Graph g;
        auto loss = nd::mse_loss(g, model.forward(g, dataset::to_forecast_input(seq, kind, scaler)),
                                 dataset::target_tensor(seq, scaler));
        loss_sum += loss.item();
        g.backward(nd::scale_shift(g, loss, 1.0 / static_cast<double>(b)));
      }
      if (!std::isfinite(loss_sum) || opt.step() != nd::StepStatus::applied) {
        result.diverged = true;
        result.failure = "non-finite " + std::string(std::isfinite(loss_sum) ? "gradient" : "loss") + " in epoch " +
                         std::to_string(epoch);
        break;
      }
      for (auto& w : constrained) nd::project_nonpositive(w);
      ++result.steps;
    }
    if (result.diverged) break;
    const double mean = loss_sum / static_cast<double>(n);
    result.epoch_loss.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }
  result.validation_rmse = std::numeric_limits<double>::quiet_NaN();
  if (!result.diverged && store.size(Split::validation) > 0) {
    result.validation_rmse = evaluate_model(model, store, Split::validation, scaler);
  }
  return result;
}

SplitScore score_split(dataset::SequenceStore& store, Split split, const ForecastFn& forecast) {
  SplitScore score;
  std::vector<Grid> preds, targets;
  std::map<std::string, std::pair<std::vector<Grid>, std::vector<Grid>>> by_volcano;
  for (std::size_t i = 0; i < store.size(split); ++i) {
    const auto& seq = store.fetch(split, i, Phase::evaluation);
    Grid p = forecast(seq);
    auto& [vp, vt] = by_volcano[seq.volcano_id];
    vp.push_back(p);
    vt.push_back(seq.target.grid);
    preds.push_back(std::move(p));
    targets.push_back(seq.target.grid);
  }
  score.sequences = preds.size();
  if (preds.empty()) {
    score.pooled = std::numeric_limits<double>::quiet_NaN();
    return score;
  }
  score.pooled = eval::rmse(preds, targets);
  for (const auto& [id, pt] : by_volcano) score.per_volcano.emplace_back(id, eval::rmse(pt.first, pt.second));
  return score;
}

double evaluate_model(const cells::Forecaster& model, dataset::SequenceStore& store, Split split,
                      const pipeline::ScalerParams& scaler) {
  const auto kind = model.spec().kind;
  return score_split(store, split, [&](const dataset::SceneSequence& seq) {
           return eval::forecast_celsius(model, dataset::to_forecast_input(seq, kind, scaler), scaler);
         }).pooled;
}

std::vector<baselines::PixelWindow> training_windows(dataset::SequenceStore& store) {
  std::vector<baselines::PixelWindow> out;
  for (std::size_t i = 0; i < store.size(Split::train); ++i) {
    const auto& seq = store.fetch(Split::train, i, Phase::gradient);
    std::vector<Grid> inputs;
    for (const auto& s : seq.inputs) inputs.push_back(s.grid);
    auto w = baselines::pixel_windows(inputs, seq.target.grid);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

}  // namespace gapcast::train
