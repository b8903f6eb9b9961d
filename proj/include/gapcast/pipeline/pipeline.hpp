#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapcast/core/grid.hpp"
#include "gapcast/core/scene.hpp"

namespace gapcast::pipeline {

/// Nearest valid pixel to (r, c) by Euclidean distance; equal distances are
/// resolved by clockwise angle from North (so N, E, S, W in that order).
std::optional<std::pair<std::size_t, std::size_t>> nearest_valid(const Grid& grid, std::size_t r, std::size_t c);

/// Fills missing pixels that see a valid pixel along at least three of the
/// four cardinal rays, using the nearest valid value. Repeats until no pixel
/// changes; each pass only reads the grid as it was at the start of the pass.
Grid fill_recovery_pixels(const Grid& grid);

inline constexpr std::size_t kBackgroundWindow = 10;
// A window qualifies when fewer than 10% of its pixels are missing.
inline constexpr double kMaxMissingFraction = 0.10;

enum class BackgroundPath { corners, perimeter };

struct Window {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Window&) const = default;
};

struct BackgroundEstimate {
  double value = 0.0;
  BackgroundPath path = BackgroundPath::corners;
  std::vector<Window> windows;  // windows whose means were averaged
};

class UnusableSceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corner windows in the order top-left, top-right, bottom-right, bottom-left.
std::vector<Window> corner_windows(std::size_t height, std::size_t width);
/// 10x10 windows around the image border, stride 10, clockwise from the
/// top-left corner; edges not divisible by 10 end with a window flush to the corner.
std::vector<Window> perimeter_windows(std::size_t height, std::size_t width);

/// Mean of the means of qualifying corner windows, or of the first four
/// qualifying perimeter windows when no corner qualifies.
/// Throws UnusableSceneError when nothing qualifies.
BackgroundEstimate estimate_background(const Grid& grid);

/// grid - bg; missing pixels stay missing.
Grid subtract_background(const Grid& grid, double bg);

struct CarryForwardReport {
  std::size_t carried = 0;              // pixel-scenes filled from an earlier scene
  std::size_t interpolated = 0;         // first-scene pixels filled by nearest neighbour
  std::vector<std::size_t> never_observed;  // flat pixel indices with no observation in any scene
};

struct CarryForwardResult {
  std::vector<Scene> scenes;
  CarryForwardReport report;
};

/// Scenes must be chronological and background subtracted. Missing pixels take
/// the most recent observed value with fill_age = days since that
/// observation. The first scene's gaps use nearest-neighbour interpolation
/// with age 0. Pixels never observed anywhere become 0 and are reported.
CarryForwardResult carry_forward_fill(std::span<const Scene> scenes);

struct ScalerParams {
  double x_min = 0.0;
  double x_max = 1.0;

  double scale(double x) const { return (x - x_min) / (x_max - x_min); }
  double inverse(double s) const { return s * (x_max - x_min) + x_min; }
  Grid scale(const Grid& g) const;
  Grid inverse(const Grid& g) const;
  bool operator==(const ScalerParams&) const = default;
};

/// Min and max over every non-missing pixel. Throws if max == min or no pixels.
ScalerParams fit_scaler(std::span<const Grid> grids);

}  // namespace gapcast::pipeline
