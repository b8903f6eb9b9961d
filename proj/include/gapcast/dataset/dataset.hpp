#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gapcast/cells/model.hpp"
#include "gapcast/core/scene.hpp"
#include "gapcast/pipeline/pipeline.hpp"

namespace gapcast::dataset {

/// Sample autocorrelations r_0..r_max_lag (r_0 = 1).
/// r_k = sum (x_t - mean)(x_{t+k} - mean) / sum (x_t - mean)^2.
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);

inline constexpr std::size_t kMinWindow = 3;
inline constexpr std::size_t kMaxWindow = 10;
inline constexpr std::size_t kMinAcfPoints = 12;
inline constexpr std::size_t kMaxAcfLag = 20;

/// Largest lag whose |r_k| exceeds 1.96/sqrt(N), clamped to [3, 10]. Lags up
/// to min(N - 1, 20) are examined. Throws for fewer than 12 points.
std::size_t select_window_length(std::span<const double> series);
/// round(mean of per-volcano selections).
std::size_t pooled_window_length(std::span<const std::vector<double>> per_volcano_series);

/// Maximum excess temperature of each scene.
std::vector<double> max_temperature_series(std::span<const Scene> scenes);

/// n input scenes and the scene that follows them.
struct SceneSequence {
  std::string volcano_id;
  std::vector<Scene> inputs;
  Scene target;
  // t_i - t_{i-1} in days; the first entry is 0.
  std::vector<double> dt_preceding;
  // t_{i+1} - t_i in days; the last entry is the gap to the target.
  std::vector<double> dt_following;
  // Per-pixel elapsed time maps for the two conventions (see build_sequences).
  std::vector<Grid> dt_maps_preceding;
  std::vector<Grid> dt_maps_following;

  std::size_t length() const { return inputs.size(); }
  bool operator==(const SceneSequence&) const = default;
};

struct SequenceOptions {
  // Add each pixel's fill age to the scene gap in the time maps. When false
  // every pixel carries the plain scene gap.
  bool fill_age_in_maps = true;
};

/// Every run of n + 1 consecutive scenes, stride 1. Time maps:
///   following step i = (t_{i+1} - t_i) + fill_age of input i
///   preceding step i = (t_i - t_{i-1}) + fill_age of input i-1, step 0 = 0
/// Fewer than n + 1 scenes yields an empty list and a warning.
std::vector<SceneSequence> build_sequences(std::span<const Scene> scenes, std::size_t n,
                                           const SequenceOptions& options = {},
                                           std::vector<std::string>* warnings = nullptr);

enum class Split { train, validation, test };
std::string_view to_string(Split s);

struct SplitSpec {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;

  static SplitSpec standard() { return {}; }
  /// Train on the chronologically first 85%, test on the rest.
  static SplitSpec train_test() { return {0.85, 0.0, 0.15}; }
  void validate() const;
};

/// Parses "70/15/15" or "85/15".
SplitSpec parse_split_mode(std::string_view mode);

/// Counts per split for N scenes: floor at each boundary, remainder to test.
std::array<std::size_t, 3> split_counts(std::size_t n_scenes, const SplitSpec& spec);

struct SceneSplit {
  std::vector<Scene> train;
  std::vector<Scene> validation;
  std::vector<Scene> test;
  const std::vector<Scene>& operator[](Split s) const;
};

/// Scenes must belong to one volcano and be chronological.
SceneSplit chronological_split(std::span<const Scene> scenes, const SplitSpec& spec);

struct VolcanoScenes {
  std::string volcano_id;
  std::vector<Scene> scenes;
};

struct Dataset {
  std::size_t window_length = 0;
  std::vector<SceneSequence> train;
  std::vector<SceneSequence> validation;
  std::vector<SceneSequence> test;

  const std::vector<SceneSequence>& operator[](Split s) const;
  std::vector<std::string> volcano_ids() const;
  bool operator==(const Dataset&) const = default;
};

/// Splits each volcano chronologically and builds sequences inside each
/// split, so no sequence crosses a split or volcano boundary.
Dataset build_dataset(std::span<const VolcanoScenes> volcanoes, std::size_t n, const SplitSpec& spec,
                      const SequenceOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Restricts training sequences to one volcano; validation and test are
/// kept for every volcano. Throws for an id absent from the dataset.
Dataset filter_volcano(const Dataset& data, const std::string& volcano_id);

/// Sequence files use the binary container (JSON header + float64 payload).
void write_sequences(const std::filesystem::path& path, std::span<const SceneSequence> sequences);
std::vector<SceneSequence> read_sequences(const std::filesystem::path& path);

/// Model input tensors for one sequence with min-max scaled frames. Time
/// values follow the cell kind's convention.
cells::ForecastInput to_forecast_input(const SceneSequence& seq, cells::CellKind kind,
                                       const pipeline::ScalerParams& scaler);
nd::Tensor target_tensor(const SceneSequence& seq, const pipeline::ScalerParams& scaler);

}  // namespace gapcast::dataset
