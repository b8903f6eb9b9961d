#include "gapcast/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gapcast/nd/graph.hpp"

namespace gapcast::eval {

double rmse(std::span<const Grid> preds, std::span<const Grid> targets) {
  if (preds.empty()) throw std::invalid_argument("rmse of an empty set is undefined");
  if (preds.size() != targets.size()) {
    throw std::invalid_argument("rmse needs equal counts, got " + std::to_string(preds.size()) + " and " +
                                std::to_string(targets.size()));
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].same_shape(targets[i])) throw std::invalid_argument("rmse: scene shapes differ");
    for (std::size_t k = 0; k < preds[i].size(); ++k) {
      const double d = preds[i].values[k] - targets[i].values[k];
      acc += d * d;
    }
    n += preds[i].size();
  }
  return std::sqrt(acc / static_cast<double>(n));
}

namespace {

std::size_t count_components(const Grid& g, double threshold) {
  std::vector<char> seen(g.size(), 0);
  std::size_t components = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (seen[start] || !(g.values[start] > threshold)) continue;
    ++components;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      const long r = static_cast<long>(k / g.width), c = static_cast<long>(k % g.width);
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) {
          const long y = r + dr, x = c + dc;
          if (y < 0 || x < 0 || y >= static_cast<long>(g.height) || x >= static_cast<long>(g.width)) continue;
          const std::size_t j = static_cast<std::size_t>(y) * g.width + static_cast<std::size_t>(x);
          if (!seen[j] && g.values[j] > threshold) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
    }
  }
  return components;
}

}  // namespace

DerivedPoint derive_point(const Grid& scene, Date date, const DeriveOptions& options) {
  DerivedPoint p;
  p.date = date;
  if (scene.size() == 0) return p;
  p.max_excess_temp = *std::max_element(scene.values.begin(), scene.values.end());
  const double sr = static_cast<double>(scene.height / 2), sc = static_cast<double>(scene.width / 2);
  std::size_t hot = 0;
  double far2 = 0.0;
  for (std::size_t r = 0; r < scene.height; ++r)
    for (std::size_t c = 0; c < scene.width; ++c) {
      if (!(scene.at(r, c) > options.threshold)) continue;
      ++hot;
      const double dr = static_cast<double>(r) - sr, dc = static_cast<double>(c) - sc;
      far2 = std::max(far2, dr * dr + dc * dc);
    }
  p.hotspot_count = options.counting == HotspotCounting::pixels ? hot : count_components(scene, options.threshold);
  p.max_hotspot_distance = std::sqrt(far2) * options.pixel_size;
  return p;
}

std::vector<DerivedPoint> derive_series(std::span<const Scene> scenes, const DeriveOptions& options) {
  std::vector<DerivedPoint> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(derive_point(s.grid, s.date, options));
  return out;
}

Grid histogram_match(const Grid& pred, std::span<const double> reference) {
  if (reference.empty()) throw std::invalid_argument("histogram matching needs a non-empty reference population");
  std::vector<double> ref(reference.begin(), reference.end());
  std::sort(ref.begin(), ref.end());
  const std::size_t n = pred.size(), m = ref.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pred.values[a] < pred.values[b]; });
  Grid out = pred;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pred.values[order[j + 1]] == pred.values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j);
    const double q = n > 1 ? rank / static_cast<double>(n - 1) : 0.5;
    const double pos = q * static_cast<double>(m - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, m - 1);
    const double frac = pos - static_cast<double>(lo);
    const double value = frac == 0.0 ? ref[lo] : ref[lo] + frac * (ref[hi] - ref[lo]);
    for (std::size_t k = i; k <= j; ++k) out.values[order[k]] = value;
    i = j + 1;
  }
  return out;
}

CumulativeHistogram cumulative_histogram(std::span<const double> population, std::size_t n_bins) {
  if (population.empty()) throw std::invalid_argument("cumulative histogram of an empty population");
  if (n_bins == 0) throw std::invalid_argument("cumulative histogram needs at least one bin");
  std::vector<double> sorted(population.begin(), population.end());
  std::sort(sorted.begin(), sorted.end());
  CumulativeHistogram h;
  h.min = sorted.front();
  h.max = sorted.back();
  const double width = (h.max - h.min) / static_cast<double>(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double edge = b + 1 == n_bins ? h.max : h.min + width * static_cast<double>(b + 1);
    h.upper_edges.push_back(edge);
    h.cumulative.push_back(static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), edge) - sorted.begin()));
  }
  return h;
}

std::string Adjustment::label() const {
  const char* where = position == Position::first ? "First" : position == Position::last ? "Last" : "All";
  char factor_text[32];
  std::snprintf(factor_text, sizeof factor_text, "%g", factor);
  return std::string(where) + " ΔT * " + factor_text;
}

std::vector<Adjustment> standard_adjustments() {
  std::vector<Adjustment> out;
  for (double f : {0.1, 10.0})
    for (Position p : {Position::first, Position::last, Position::all}) out.push_back({p, f});
  return out;
}

cells::ForecastInput adjust_time(const cells::ForecastInput& input, cells::TimeConvention convention,
                                 const Adjustment& adjustment) {
  cells::ForecastInput out;
  out.frames = input.frames;
  out.dt_days = input.dt_days;
  for (const auto& m : input.dt_maps) out.dt_maps.push_back(m.clone());
  const std::size_t n = std::max(out.dt_days.size(), out.dt_maps.size());
  if (n == 0) return out;
  std::size_t begin = 0, end = n;
  const std::size_t first = convention == cells::TimeConvention::preceding && n > 1 ? 1 : 0;
  if (adjustment.position == Position::first) {
    begin = first;
    end = first + 1;
  } else if (adjustment.position == Position::last) {
    begin = n - 1;
  }
  for (std::size_t i = begin; i < end; ++i) {
    if (i < out.dt_days.size()) out.dt_days[i] *= adjustment.factor;
    if (i < out.dt_maps.size()) {
      for (auto& v : out.dt_maps[i].data()) v *= adjustment.factor;
    }
  }
  return out;
}

Grid forecast_celsius(const cells::Forecaster& model, const cells::ForecastInput& input,
                      const pipeline::ScalerParams& scaler) {
  nd::Graph g(false);
  const auto out = model.forward(g, input);
  Grid grid(out.dim(1), out.dim(2));
  for (std::size_t k = 0; k < grid.size(); ++k) grid.values[k] = scaler.inverse(out.data()[k]);
  return grid;
}

std::vector<PerturbationResult> perturb_time_experiment(const cells::Forecaster& model,
                                                        std::span<const dataset::SceneSequence> sequences,
                                                        const pipeline::ScalerParams& scaler,
                                                        const PerturbOptions& options) {
  const auto kind = model.spec().kind;
  const auto convention = cells::time_convention(kind);
  if (convention == cells::TimeConvention::none && !options.allow_time_blind) {
    throw std::invalid_argument("time perturbation is meaningless for " + std::string(cells::to_string(kind)) +
                                ", which ignores elapsed time");
  }
  if (sequences.empty()) throw std::invalid_argument("time perturbation needs at least one sequence");
  std::vector<cells::ForecastInput> inputs;
  std::vector<Grid> original;
  for (const auto& s : sequences) {
    inputs.push_back(dataset::to_forecast_input(s, kind, scaler));
    original.push_back(forecast_celsius(model, inputs.back(), scaler));
  }
  std::vector<Adjustment> adjustments;
  if (options.include_identity) adjustments.push_back({Position::all, 1.0});
  for (const auto& a : standard_adjustments()) adjustments.push_back(a);

  std::vector<PerturbationResult> results;
  for (const auto& adj : adjustments) {
    std::vector<Grid> adjusted;
    double diff_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      adjusted.push_back(forecast_celsius(model, adjust_time(inputs[i], convention, adj), scaler));
      for (std::size_t k = 0; k < adjusted.back().size(); ++k) diff_sum += adjusted.back().values[k] - original[i].values[k];
      count += adjusted.back().size();
    }
    PerturbationResult r;
    r.label = adj.factor == 1.0 ? "Identity ΔT * 1" : adj.label();
    r.mean_diff = diff_sum / static_cast<double>(count);
    r.rmse_vs_original = rmse(adjusted, original);
    results.push_back(r);
  }
  return results;
}

}  // namespace gapcast::eval
