#include "gapcast/train/experiment.hpp"

namespace gapcast::train {

std::vector<Grid> training_grids(std::span<const dataset::VolcanoScenes> volcanoes, const dataset::SplitSpec& split) {
  std::vector<Grid> out;
  for (const auto& v : volcanoes)
    for (const auto& s : dataset::chronological_split(v.scenes, split).train) out.push_back(s.grid);
  return out;
}

PreparedData prepare_data(std::span<const pipeline::ProcessedVolcano> processed, const PrepareOptions& options) {
  PreparedData out;
  for (const auto& p : processed) out.volcanoes.push_back({p.volcano_id, p.scenes});

  std::size_t n = options.window_length;
  if (n == 0) {
    std::vector<std::vector<double>> series;
    for (const auto& v : out.volcanoes) {
      const auto train = dataset::chronological_split(v.scenes, options.split).train;
      if (train.size() < dataset::kMinAcfPoints) {
        out.warnings.push_back(v.volcano_id + ": too few training scenes for window selection");
        continue;
      }
      series.push_back(dataset::max_temperature_series(train));
    }
    if (series.empty()) {
      n = kDefaultWindow;
      out.warnings.push_back("no volcano supports window selection; using " + std::to_string(n));
    } else {
      n = dataset::pooled_window_length(series);
    }
  }
  out.data = dataset::build_dataset(out.volcanoes, n, options.split, options.sequences, &out.warnings);
  out.scaler = pipeline::fit_scaler(training_grids(out.volcanoes, options.split));
  return out;
}

}  // namespace gapcast::train
