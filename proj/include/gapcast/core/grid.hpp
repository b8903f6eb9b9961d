#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace gapcast {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Row-major H x W raster of doubles. NaN marks a missing pixel.
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

  std::size_t size() const { return values.size(); }
  double& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  bool same_shape(const Grid& o) const { return height == o.height && width == o.width; }
  std::size_t missing_count() const;

  bool operator==(const Grid& o) const;
};

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws std::invalid_argument on malformed or impossible dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);
/// Signed whole days from a to b.
inline double days_between(Date a, Date b) { return static_cast<double>((b - a).count()); }

}  // namespace gapcast
