#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gapcast/core/scene.hpp"
#include "gapcast/pipeline/io.hpp"
#include "gapcast/pipeline/pipeline.hpp"

namespace gapcast::pipeline {

struct SceneReport {
  std::string file;
  Date date{};
  std::string label;
  bool usable = true;
  std::string reason;  // why an unusable scene was dropped
  double background = 0.0;
  BackgroundPath path = BackgroundPath::corners;
  std::size_t background_windows = 0;
  std::size_t missing_raw = 0;
  std::size_t recovery_filled = 0;
};

struct VolcanoReport {
  std::string volcano_id;
  std::vector<SceneReport> scenes;
  CarryForwardReport carry;
};

struct ProcessedVolcano {
  std::string volcano_id;
  std::vector<Scene> scenes;  // usable scenes only, chronological
  VolcanoReport report;
};

/// Recovery fill, background estimation and subtraction, then carry-forward
/// fill across the usable scenes. Nonviable scenes are skipped; scenes
/// without a background region are dropped and reported.
ProcessedVolcano preprocess_volcano(const io::Manifest& manifest, std::span<const Grid> rasters);
/// Reads the rasters listed in the manifest relative to its directory.
ProcessedVolcano preprocess_manifest(const std::filesystem::path& manifest_path);

nlohmann::json report_json(const VolcanoReport& report);

/// Processed scenes for one volcano as a float64 container file.
void write_processed(const std::filesystem::path& path, const ProcessedVolcano& volcano);
ProcessedVolcano read_processed(const std::filesystem::path& path);

}  // namespace gapcast::pipeline
