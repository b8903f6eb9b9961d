#pragma once

#include <span>
#include <string>
#include <vector>

#include "gapcast/cells/model.hpp"
#include "gapcast/core/scene.hpp"
#include "gapcast/dataset/dataset.hpp"
#include "gapcast/pipeline/pipeline.hpp"

namespace gapcast::eval {

/// Root of the mean squared error pooled over every pixel of every scene.
double rmse(std::span<const Grid> preds, std::span<const Grid> targets);

inline constexpr double kHotThreshold = 10.0;      // degrees C above background
inline constexpr double kPixelSizeMeters = 90.0;

enum class HotspotCounting { pixels, components };

struct DeriveOptions {
  double threshold = kHotThreshold;
  double pixel_size = kPixelSizeMeters;
  // Connected components (8-neighbour) instead of pixels; not the default.
  HotspotCounting counting = HotspotCounting::pixels;
};

struct DerivedPoint {
  Date date{};
  double max_excess_temp = 0.0;
  std::size_t hotspot_count = 0;
  double max_hotspot_distance = 0.0;  // meters from the summit pixel
  bool operator==(const DerivedPoint&) const = default;
};

/// Summit pixel is (H/2, W/2) rounded down. Hot means strictly above the threshold.
DerivedPoint derive_point(const Grid& scene, Date date, const DeriveOptions& options = {});
std::vector<DerivedPoint> derive_series(std::span<const Scene> scenes, const DeriveOptions& options = {});

/// Rank-preserving quantile mapping onto `reference`. A pixel with (mean, for
/// ties) rank r among N pixels takes the reference value at position
/// r/(N-1) * (M-1) of the M sorted reference values, interpolated linearly.
Grid histogram_match(const Grid& pred, std::span<const double> reference);

struct CumulativeHistogram {
  std::vector<double> upper_edges;        // n_bins equal-width bins from min to max
  std::vector<std::size_t> cumulative;    // values <= upper edge
  double min = 0.0;
  double max = 0.0;
};

CumulativeHistogram cumulative_histogram(std::span<const double> population, std::size_t n_bins);

enum class Position { first, last, all };

struct Adjustment {
  Position position = Position::all;
  double factor = 1.0;
  std::string label() const;
};

/// The six adjustments in table order: first/last/all times 0.1, then times 10.
std::vector<Adjustment> standard_adjustments();

/// Scales the model's elapsed-time inputs at the chosen positions. "First"
/// is the first gap between two input scenes; under the preceding-time
/// convention entry 0 is the structural zero, so entry 1 is used.
cells::ForecastInput adjust_time(const cells::ForecastInput& input, cells::TimeConvention convention,
                                 const Adjustment& adjustment);

struct PerturbationResult {
  std::string label;
  double mean_diff = 0.0;         // mean(adjusted - original), degrees C
  double rmse_vs_original = 0.0;  // degrees C
};

struct PerturbOptions {
  // Emit an identity (x1) control row before the six adjustments.
  bool include_identity = true;
  // Run on a model that ignores elapsed time (negative control only).
  bool allow_time_blind = false;
};

std::vector<PerturbationResult> perturb_time_experiment(const cells::Forecaster& model,
                                                        std::span<const dataset::SceneSequence> sequences,
                                                        const pipeline::ScalerParams& scaler,
                                                        const PerturbOptions& options = {});

/// Model forecast for one sequence in degrees C.
Grid forecast_celsius(const cells::Forecaster& model, const cells::ForecastInput& input,
                      const pipeline::ScalerParams& scaler);

}  // namespace gapcast::eval
