#pragma once

#include <span>
#include <string>
#include <vector>

#include "gapcast/dataset/dataset.hpp"
#include "gapcast/pipeline/pipeline.hpp"
#include "gapcast/pipeline/preprocess.hpp"

namespace gapcast::train {

struct PreparedData {
  dataset::Dataset data;
  pipeline::ScalerParams scaler;
  std::vector<dataset::VolcanoScenes> volcanoes;
  std::vector<std::string> warnings;
};

struct PrepareOptions {
  // 0 selects the pooled autocorrelation window from the training scenes.
  std::size_t window_length = 0;
  dataset::SplitSpec split = dataset::SplitSpec::standard();
  dataset::SequenceOptions sequences;
};

inline constexpr std::size_t kDefaultWindow = 6;

/// Splits each volcano, picks the window length, builds sequences and fits the
/// scaler on the training-split scenes of every volcano.
PreparedData prepare_data(std::span<const pipeline::ProcessedVolcano> processed, const PrepareOptions& options);

/// Training-split scenes of every volcano.
std::vector<Grid> training_grids(std::span<const dataset::VolcanoScenes> volcanoes, const dataset::SplitSpec& split);

}  // namespace gapcast::train
