#pragma once

// Scalar straight-line evaluations of the dense cells, written without the
// tensor library so they share nothing with the code under test.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace gapcast::oracle {

struct DenseState {
  std::vector<double> h;
  std::vector<double> c;
};

inline double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Row r of (W v) for W stored row-major with `cols` columns.
inline double row_dot(std::span<const double> w, std::size_t r, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t m = 0; m < v.size(); ++m) acc += w[r * v.size() + m] * v[m];
  return acc;
}

inline DenseState lstm(std::span<const double> wx, std::span<const double> wh, std::span<const double> b,
                       std::span<const double> x, const DenseState& s) {
  const std::size_t n = s.h.size();
  DenseState out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    auto pre = [&](std::size_t k) { return row_dot(wx, k * n + j, x) + row_dot(wh, k * n + j, s.h) + b[k * n + j]; };
    const double i = sig(pre(0));
    const double f = sig(pre(1));
    const double cand = std::tanh(pre(2));
    const double o = sig(pre(3));
    out.c[j] = f * s.c[j] + i * cand;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

/// sigmoid_output selects sigma instead of tanh on the final squash.
inline DenseState time_lstm(std::span<const double> wx, std::span<const double> wh, std::span<const double> wt1,
                            std::span<const double> wt2, std::span<const double> b, std::span<const double> x,
                            double dt_scaled, const DenseState& s, bool sigmoid_output = false) {
  const std::size_t n = s.h.size();
  DenseState out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    auto px = [&](std::size_t k) { return row_dot(wx, k * n + j, x) + b[k * n + j]; };
    auto ph = [&](std::size_t k) { return row_dot(wh, k * n + j, s.h); };
    const double i = sig(px(0) + ph(0));
    const double t1 = sig(px(1) + sig(wt1[j] * dt_scaled));
    const double t2 = sig(px(2) + sig(wt2[j] * dt_scaled));
    const double cand = sig(px(3) + ph(1));
    const double o = sig(px(4) + ph(2));
    const double c_tilde = (1.0 - i * t1) * s.c[j] + i * t1 * cand;
    out.c[j] = (1.0 - i) * s.c[j] + i * t2 * cand;
    out.h[j] = o * (sigmoid_output ? sig(c_tilde) : std::tanh(c_tilde));
  }
  return out;
}

inline double decay(double days) { return 1.0 / std::log(std::numbers::e + days); }

inline DenseState time_aware_lstm(std::span<const double> wx, std::span<const double> wh, std::span<const double> b,
                                  std::span<const double> wd, std::span<const double> bd, std::span<const double> x,
                                  double dt_days, const DenseState& s) {
  const std::size_t n = s.h.size();
  std::vector<double> adjusted(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double short_term = std::tanh(row_dot(wd, j, s.c) + bd[j]);
    const double long_term = s.c[j] - short_term;
    adjusted[j] = long_term + short_term * decay(dt_days);
  }
  DenseState out{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    auto pre = [&](std::size_t k) { return row_dot(wx, k * n + j, x) + row_dot(wh, k * n + j, s.h) + b[k * n + j]; };
    const double i = sig(pre(0));
    const double f = sig(pre(1));
    const double cand = std::tanh(pre(2));
    const double o = sig(pre(3));
    out.c[j] = f * adjusted[j] + i * cand;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

}  // namespace gapcast::oracle
