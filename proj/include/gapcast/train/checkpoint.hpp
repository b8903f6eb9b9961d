#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "gapcast/baselines/baselines.hpp"
#include "gapcast/cells/model.hpp"
#include "gapcast/pipeline/pipeline.hpp"
#include "gapcast/train/trainer.hpp"

namespace gapcast::train {

enum class ModelType { neural, ar, last_scene, all_zeros };
std::string_view to_string(ModelType t);
ModelType parse_model_type(std::string_view name);

nlohmann::json spec_to_json(const cells::ModelSpec& spec);
cells::ModelSpec spec_from_json(const nlohmann::json& j);

/// Everything needed to reproduce a forecast: the model, its scaler and the
/// protocol it was trained under.
struct Checkpoint {
  ModelType type = ModelType::neural;
  cells::ModelSpec spec;  // window_length is meaningful for every type
  std::optional<cells::Forecaster> model;
  baselines::ARModel ar;
  pipeline::ScalerParams scaler;
  std::string training_filter = "all";
  std::string split_mode = "70/15/15";
  bool fill_age_in_maps = true;
  std::uint64_t seed = 0;
};

/// Single-line JSON header (spec, parameter names/shapes/offsets, scaler,
/// protocol) followed by raw little-endian float64 parameters in header order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws CheckpointMismatch when the stored parameters do not match the
/// model the stored spec describes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Forecasts in degrees C for whichever model the checkpoint holds.
ForecastFn checkpoint_forecaster(const Checkpoint& ckpt);

}  // namespace gapcast::train
