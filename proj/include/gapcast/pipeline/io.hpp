#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "gapcast/core/grid.hpp"
#include "gapcast/core/scene.hpp"
#include "gapcast/pipeline/pipeline.hpp"

namespace gapcast::io {

namespace fs = std::filesystem;

/// Raw little-endian float32, row-major, NaN = missing.
Grid read_raster(const fs::path& path, std::size_t height, std::size_t width);
void write_raster(const fs::path& path, const Grid& grid);

/// Thrown for unreadable or malformed input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::string file;
  Date date{};
  std::string label = "viable";  // viable | uncertain | nonviable
};

struct Manifest {
  std::string volcano_id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<ManifestEntry> scenes;
};

Manifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const Manifest& manifest);
nlohmann::json to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& j);

/// All *.json manifests directly inside `dir`, sorted by volcano id.
std::vector<std::pair<fs::path, Manifest>> list_manifests(const fs::path& dir);

/// Writes `text` to `path` (creating parent directories).
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace gapcast::io
