#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gapcast/baselines/baselines.hpp"
#include "gapcast/cells/model.hpp"
#include "gapcast/dataset/store.hpp"
#include "gapcast/pipeline/pipeline.hpp"

namespace gapcast::train {

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  // Cosine decay of the learning rate to this fraction by the last step; 1 keeps it constant.
  double final_lr_fraction = 1.0;
  std::uint64_t seed = 0;  // shuffling
  // Called after every epoch with (1-based epoch, mean training MSE in scaled units).
  std::function<void(std::size_t, double)> on_epoch;
};

/// Step size for 0-based `step` of `total_steps`: `base` at the first step,
/// `base * final_fraction` at the last.
double cosine_learning_rate(double base, double final_fraction, std::size_t step, std::size_t total_steps);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training MSE per epoch, scaled units
  double validation_rmse = 0.0;    // degrees C, NaN when there is no validation data
  bool diverged = false;
  std::string failure;
  std::uint64_t steps = 0;
};

/// Adam on MSE over the store's training sequences. Training data is read in
/// the gradient phase only; validation is scored afterwards in the evaluation
/// phase. Constrained time-gate weights are projected after every step.
TrainResult train_model(cells::Forecaster& model, dataset::SequenceStore& store, const pipeline::ScalerParams& scaler,
                        const TrainOptions& options);

/// Pooled RMSE in degrees C of the model's forecasts over one split.
double evaluate_model(const cells::Forecaster& model, dataset::SequenceStore& store, dataset::Split split,
                      const pipeline::ScalerParams& scaler);

/// Per-volcano and pooled RMSE for any forecaster.
struct SplitScore {
  double pooled = 0.0;
  std::vector<std::pair<std::string, double>> per_volcano;
  std::size_t sequences = 0;
};
using ForecastFn = std::function<Grid(const dataset::SceneSequence&)>;
SplitScore score_split(dataset::SequenceStore& store, dataset::Split split, const ForecastFn& forecast);

/// Pixel windows for AR fitting from the training split (gradient phase).
std::vector<baselines::PixelWindow> training_windows(dataset::SequenceStore& store);

}  // namespace gapcast::train
