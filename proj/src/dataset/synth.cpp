#include "gapcast/dataset/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gapcast/pipeline/pipeline.hpp"

namespace gapcast::dataset {

double sample_gap(const GapDistribution& dist, std::mt19937_64& rng) {
  const double mu = std::log(dist.mean_days) - 0.5 * dist.log_sd * dist.log_sd;
  std::lognormal_distribution<double> d(mu, dist.log_sd);
  return std::max(1.0, std::round(d(rng)));
}

Grid render_blobs(std::size_t height, std::size_t width, double environment, std::span<const Blob> blobs) {
  Grid g(height, width, environment);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      double v = environment;
      for (const auto& b : blobs) {
        const double dr = static_cast<double>(r) - b.row, dc = static_cast<double>(c) - b.col;
        v += b.amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * b.width * b.width));
      }
      g.at(r, c) = v;
    }
  return g;
}

namespace {

struct Slot {
  bool active = false;
  double mean_amplitude = 0.0;
  Blob blob;
};

void cut_wedge(Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
  std::uniform_real_distribution<double> depth(0.3, 0.8);
  const double theta = angle(rng);
  const double d = depth(rng) * 0.5 * static_cast<double>(std::min(g.height, g.width));
  const double cr = 0.5 * static_cast<double>(g.height), cc = 0.5 * static_cast<double>(g.width);
  for (std::size_t r = 0; r < g.height; ++r)
    for (std::size_t c = 0; c < g.width; ++c) {
      const double u = (static_cast<double>(c) - cc) * std::cos(theta) + (static_cast<double>(r) - cr) * std::sin(theta);
      if (u > d) g.at(r, c) = kMissing;
    }
}

void punch_holes(Grid& g, const Blob& near, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4), offset(-2, 2), size(1, 2);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const long r0 = std::lround(near.row) + offset(rng), c0 = std::lround(near.col) + offset(rng);
    const int s = size(rng);
    for (long r = r0; r < r0 + s; ++r)
      for (long c = c0; c < c0 + s; ++c) {
        if (r >= 0 && c >= 0 && r < static_cast<long>(g.height) && c < static_cast<long>(g.width)) {
          g.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = kMissing;
        }
      }
  }
}

// Masks may not remove every corner window, so each scene keeps a usable background.
bool has_usable_corner(const Grid& g) {
  for (const auto& w : pipeline::corner_windows(g.height, g.width)) {
    std::size_t missing = 0;
    for (std::size_t r = w.row; r < w.row + pipeline::kBackgroundWindow; ++r)
      for (std::size_t c = w.col; c < w.col + pipeline::kBackgroundWindow; ++c) missing += is_missing(g.at(r, c));
    if (static_cast<double>(missing) < pipeline::kMaxMissingFraction * 100.0) return true;
  }
  return false;
}

SynthVolcano synthesize_volcano(const SynthConfig& cfg, std::size_t index) {
  std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = static_cast<double>(cfg.height), w = static_cast<double>(cfg.width);

  SynthVolcano v;
  char id[32];
  std::snprintf(id, sizeof id, "synth_%02zu", index + 1);
  v.manifest.volcano_id = id;
  v.manifest.height = cfg.height;
  v.manifest.width = cfg.width;

  std::vector<Slot> slots(3);
  for (auto& s : slots) {
    s.active = unit(rng) < 0.75;
    s.mean_amplitude = s.active ? 15.0 + 45.0 * unit(rng) : 0.0;
    s.blob.row = h / 2.0 + (unit(rng) - 0.5) * h / 4.0;
    s.blob.col = w / 2.0 + (unit(rng) - 0.5) * w / 4.0;
    s.blob.width = (1.5 + 2.0 * unit(rng)) * std::max(1.0, std::min(h, w) / 48.0);
    s.blob.amplitude = s.mean_amplitude;
  }
  const double environment_base = 5.0 + 20.0 * unit(rng);
  Date date = cfg.start + std::chrono::days(static_cast<int>(unit(rng) * 365.0));

  for (std::size_t t = 0; t < cfg.n_scenes; ++t) {
    if (t > 0) {
      const double gap = sample_gap(cfg.gaps, rng);
      date += std::chrono::days(static_cast<int>(gap));
      const double rho = std::exp(-gap / cfg.reversion_days);
      const double drift = 0.25 * std::sqrt(gap / 37.0) * std::max(1.0, std::min(h, w) / 48.0);
      for (auto& s : slots) {
        if (!s.active) continue;
        const double spread = 0.35 * s.mean_amplitude;
        s.blob.amplitude = std::max(0.0, s.mean_amplitude + (s.blob.amplitude - s.mean_amplitude) * rho +
                                             spread * std::sqrt(1.0 - rho * rho) * normal(rng));
        s.blob.row = std::clamp(s.blob.row + drift * normal(rng), h / 4.0, 3.0 * h / 4.0);
        s.blob.col = std::clamp(s.blob.col + drift * normal(rng), w / 4.0, 3.0 * w / 4.0);
      }
    }
    std::vector<Blob> active;
    for (const auto& s : slots) {
      if (s.active) active.push_back(s.blob);
    }
    const double environment = environment_base + cfg.background_sd * normal(rng);
    Grid g = render_blobs(cfg.height, cfg.width, environment, active);
    for (auto& val : g.values) val += cfg.noise_sd * normal(rng);
    Grid masked = g;
    if (unit(rng) < cfg.wedge_probability) cut_wedge(masked, rng);
    if (!active.empty() && unit(rng) < cfg.hole_probability) punch_holes(masked, active.front(), rng);
    if (has_usable_corner(masked)) g = std::move(masked);

    char file[64];
    std::snprintf(file, sizeof file, "%s/scene_%03zu.f32", id, t);
    v.manifest.scenes.push_back({file, date, "viable"});
    v.rasters.push_back(std::move(g));
    v.blobs.push_back(std::move(active));
  }
  return v;
}

}  // namespace

std::vector<SynthVolcano> synthesize_corpus(const SynthConfig& config) {
  if (config.height < 10 || config.width < 10) throw std::invalid_argument("synthetic scenes must be at least 10x10");
  std::vector<SynthVolcano> out;
  for (std::size_t i = 0; i < config.n_volcanoes; ++i) out.push_back(synthesize_volcano(config, i));
  return out;
}

void write_corpus(const std::filesystem::path& dir, std::span<const SynthVolcano> corpus) {
  for (const auto& v : corpus) {
    io::write_manifest(dir / (v.manifest.volcano_id + ".json"), v.manifest);
    for (std::size_t i = 0; i < v.rasters.size(); ++i) io::write_raster(dir / v.manifest.scenes[i].file, v.rasters[i]);
  }
}

}  // namespace gapcast::dataset
