#include "gapcast/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gapcast::pipeline {
namespace {

double clockwise_from_north(long dr, long dc) {
  double a = std::atan2(static_cast<double>(dc), static_cast<double>(-dr));
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

bool sees_valid(const Grid& g, std::size_t r, std::size_t c, int dr, int dc) {
  long y = static_cast<long>(r) + dr, x = static_cast<long>(c) + dc;
  while (y >= 0 && x >= 0 && y < static_cast<long>(g.height) && x < static_cast<long>(g.width)) {
    if (!is_missing(g.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)))) return true;
    y += dr;
    x += dc;
  }
  return false;
}

struct WindowStats {
  std::size_t missing = 0;
  double mean = 0.0;
};

WindowStats window_stats(const Grid& g, const Window& w) {
  WindowStats s;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = w.row; r < w.row + kBackgroundWindow; ++r)
    for (std::size_t c = w.col; c < w.col + kBackgroundWindow; ++c) {
      const double v = g.at(r, c);
      if (is_missing(v)) {
        ++s.missing;
      } else {
        sum += v;
        ++n;
      }
    }
  s.mean = n ? sum / static_cast<double>(n) : 0.0;
  return s;
}

bool qualifies(const WindowStats& s) {
  return static_cast<double>(s.missing) < kMaxMissingFraction * static_cast<double>(kBackgroundWindow * kBackgroundWindow);
}

// Offsets start, start+10, ... up to and including `last`, with `last` appended when not on the stride.
std::vector<std::size_t> strided(std::size_t last) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v <= last; v += kBackgroundWindow) out.push_back(v);
  if (out.back() != last) out.push_back(last);
  return out;
}

}  // namespace

std::optional<std::pair<std::size_t, std::size_t>> nearest_valid(const Grid& g, std::size_t r, std::size_t c) {
  if (!is_missing(g.at(r, c))) return std::pair{r, c};
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const long max_ring = std::max(H, W);
  long best_d2 = std::numeric_limits<long>::max();
  double best_angle = 0.0;
  std::optional<std::pair<std::size_t, std::size_t>> best;
  auto consider = [&](long dr, long dc) {
    const long y = static_cast<long>(r) + dr, x = static_cast<long>(c) + dc;
    if (y < 0 || x < 0 || y >= H || x >= W) return;
    if (is_missing(g.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)))) return;
    const long d2 = dr * dr + dc * dc;
    const double angle = clockwise_from_north(dr, dc);
    if (d2 < best_d2 || (d2 == best_d2 && angle < best_angle)) {
      best_d2 = d2;
      best_angle = angle;
      best = std::pair{static_cast<std::size_t>(y), static_cast<std::size_t>(x)};
    }
  };
  for (long k = 1; k <= max_ring && k * k <= best_d2; ++k) {
    for (long d = -k; d <= k; ++d) {
      consider(-k, d);
      consider(k, d);
      if (d != -k && d != k) {
        consider(d, -k);
        consider(d, k);
      }
    }
  }
  return best;
}

Grid fill_recovery_pixels(const Grid& grid) {
  Grid cur = grid;
  for (;;) {
    Grid next = cur;
    bool changed = false;
    for (std::size_t r = 0; r < cur.height; ++r)
      for (std::size_t c = 0; c < cur.width; ++c) {
        if (!is_missing(cur.at(r, c))) continue;
        const int dirs = sees_valid(cur, r, c, -1, 0) + sees_valid(cur, r, c, 0, 1) + sees_valid(cur, r, c, 1, 0) +
                         sees_valid(cur, r, c, 0, -1);
        if (dirs < 3) continue;
        const auto src = nearest_valid(cur, r, c);
        next.at(r, c) = cur.at(src->first, src->second);
        changed = true;
      }
    if (!changed) return cur;
    cur = std::move(next);
  }
}

std::vector<Window> corner_windows(std::size_t height, std::size_t width) {
  const std::size_t b = height - kBackgroundWindow, r = width - kBackgroundWindow;
  return {{0, 0}, {0, r}, {b, r}, {b, 0}};
}

std::vector<Window> perimeter_windows(std::size_t height, std::size_t width) {
  if (height < kBackgroundWindow || width < kBackgroundWindow) return {};
  const std::size_t bottom = height - kBackgroundWindow, right = width - kBackgroundWindow;
  std::vector<Window> out;
  auto push = [&](Window w) {
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  };
  for (std::size_t c : strided(right)) push({0, c});
  for (std::size_t r : strided(bottom)) push({r, right});
  for (std::size_t c : strided(right)) push({bottom, right - c});
  for (std::size_t r : strided(bottom)) push({bottom - r, 0});
  return out;
}

BackgroundEstimate estimate_background(const Grid& grid) {
  if (grid.height < kBackgroundWindow || grid.width < kBackgroundWindow) {
    throw std::invalid_argument("background estimation needs at least a 10x10 grid");
  }
  BackgroundEstimate est;
  double sum = 0.0;
  for (const auto& w : corner_windows(grid.height, grid.width)) {
    const auto s = window_stats(grid, w);
    if (!qualifies(s)) continue;
    est.windows.push_back(w);
    sum += s.mean;
  }
  if (est.windows.empty()) {
    est.path = BackgroundPath::perimeter;
    for (const auto& w : perimeter_windows(grid.height, grid.width)) {
      const auto s = window_stats(grid, w);
      if (!qualifies(s)) continue;
      est.windows.push_back(w);
      sum += s.mean;
      if (est.windows.size() == 4) break;
    }
  }
  if (est.windows.empty()) throw UnusableSceneError("no corner or perimeter window has fewer than 10% missing pixels");
  est.value = sum / static_cast<double>(est.windows.size());
  return est;
}

Grid subtract_background(const Grid& grid, double bg) {
  if (!std::isfinite(bg)) throw std::invalid_argument("background must be finite");
  Grid out = grid;
  for (auto& v : out.values) v -= bg;  // NaN - bg stays NaN
  return out;
}

CarryForwardResult carry_forward_fill(std::span<const Scene> scenes) {
  CarryForwardResult result;
  if (scenes.empty()) return result;
  const Grid& first = scenes.front().grid;
  for (std::size_t i = 1; i < scenes.size(); ++i) {
    if (!scenes[i].grid.same_shape(first)) throw std::invalid_argument("scenes differ in shape");
    if (scenes[i].date <= scenes[i - 1].date) throw std::invalid_argument("scenes are not in strictly increasing date order");
  }
  const std::size_t n = first.size();
  std::vector<bool> ever(n, false);
  for (const auto& s : scenes)
    for (std::size_t k = 0; k < n; ++k) ever[k] = ever[k] || !is_missing(s.grid.values[k]);
  for (std::size_t k = 0; k < n; ++k) {
    if (!ever[k]) result.report.never_observed.push_back(k);
  }

  std::vector<double> last_value(n);
  std::vector<Date> last_seen(n, scenes.front().date);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Scene out = scenes[i];
    out.fill_age = Grid(first.height, first.width, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      double& v = out.grid.values[k];
      if (!ever[k]) {
        v = 0.0;
      } else if (!is_missing(v)) {
        last_value[k] = v;
        last_seen[k] = out.date;
      } else if (i == 0) {
        const auto src = nearest_valid(scenes[0].grid, k / first.width, k % first.width);
        v = src ? scenes[0].grid.at(src->first, src->second) : 0.0;
        last_value[k] = v;
        ++result.report.interpolated;
      } else {
        v = last_value[k];
        out.fill_age.values[k] = days_between(last_seen[k], out.date);
        ++result.report.carried;
      }
    }
    result.scenes.push_back(std::move(out));
  }
  return result;
}

Grid ScalerParams::scale(const Grid& g) const {
  Grid out = g;
  for (auto& v : out.values) v = scale(v);
  return out;
}

Grid ScalerParams::inverse(const Grid& g) const {
  Grid out = g;
  for (auto& v : out.values) v = inverse(v);
  return out;
}

ScalerParams fit_scaler(std::span<const Grid> grids) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : grids)
    for (double v : g.values) {
      if (is_missing(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) throw std::invalid_argument("cannot fit scaler: no observed pixels");
  if (!(hi > lo)) throw std::invalid_argument("cannot fit scaler: max equals min (" + std::to_string(lo) + ")");
  return {lo, hi};
}

}  // namespace gapcast::pipeline
