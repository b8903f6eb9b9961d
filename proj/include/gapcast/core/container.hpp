#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace gapcast::io {

/// Binary container: one line of compact JSON, a newline, then raw
/// little-endian float64 values. Used for checkpoints and sequence files.
struct Container {
  nlohmann::json header;
  std::vector<double> payload;
};

void write_container(const std::filesystem::path& path, const nlohmann::json& header, std::span<const double> payload);
Container read_container(const std::filesystem::path& path);

}  // namespace gapcast::io
