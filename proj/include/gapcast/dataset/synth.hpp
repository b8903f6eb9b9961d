#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "gapcast/core/grid.hpp"
#include "gapcast/pipeline/io.hpp"

namespace gapcast::dataset {

/// Log-normal scene gaps, rounded to whole days (at least one).
struct GapDistribution {
  double mean_days = 37.0;
  double log_sd = 0.9;
};

double sample_gap(const GapDistribution& dist, std::mt19937_64& rng);

struct Blob {
  double row = 0.0;
  double col = 0.0;
  double amplitude = 0.0;  // degrees C at the centre
  double width = 2.0;      // Gaussian sd in pixels
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n_volcanoes = 3;
  std::size_t n_scenes = 60;
  std::size_t height = 96;
  std::size_t width = 96;
  GapDistribution gaps;
  double noise_sd = 1.0;            // per-pixel sensor noise, degrees C
  double background_sd = 2.0;       // scene-to-scene shift of the environment
  double reversion_days = 60.0;     // amplitude mean-reversion time scale
  double wedge_probability = 0.25;  // chance a scene loses an edge wedge
  double hole_probability = 0.3;    // chance of recovery holes near a hotspot
  Date start = parse_date("2000-01-01");
};

struct SynthVolcano {
  io::Manifest manifest;
  std::vector<Grid> rasters;              // degrees C, NaN = missing
  std::vector<std::vector<Blob>> blobs;   // ground truth per scene (inactive slots omitted)
};

/// Noise-free environment plus Gaussian blobs.
Grid render_blobs(std::size_t height, std::size_t width, double environment, std::span<const Blob> blobs);

/// Deterministic in `config`. Each volcano has up to three hotspot blobs whose
/// amplitude reverts toward a per-blob mean over elapsed time and whose
/// position drifts by a random walk.
std::vector<SynthVolcano> synthesize_corpus(const SynthConfig& config);

/// Writes <dir>/<id>.json manifests and <dir>/<id>/scene_NNN.f32 rasters.
void write_corpus(const std::filesystem::path& dir, std::span<const SynthVolcano> corpus);

}  // namespace gapcast::dataset
