#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "gapcast/baselines/baselines.hpp"

namespace gapcast::baselines {
namespace {

Grid grid_of(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 5.0);
  Grid g(h, w);
  for (auto& v : g.values) v = d(rng);
  return g;
}

// Pixel windows from x_t = phi * x_{t-1} started at random values.
std::vector<PixelWindow> ar1_windows(double phi, std::size_t count, std::size_t p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> start(-2.0, 2.0);
  std::vector<PixelWindow> out;
  for (std::size_t i = 0; i < count; ++i) {
    PixelWindow w;
    double x = start(rng);
    for (std::size_t k = 0; k < p; ++k) {
      w.history.push_back(x);
      x *= phi;
    }
    w.target = x;
    out.push_back(w);
  }
  return out;
}

TEST(LastScene, ReturnsFinalScene) {
  std::mt19937_64 rng(1);
  std::vector<Grid> seq{grid_of(4, 5, rng), grid_of(4, 5, rng), grid_of(4, 5, rng)};
  EXPECT_EQ(last_scene_forecast(seq), seq.back());
}

TEST(LastScene, RejectsEmpty) { EXPECT_THROW(last_scene_forecast({}), std::invalid_argument); }

TEST(LastScene, BitIdenticalToArOneWithUnitCoefficient) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Grid> seq{grid_of(6, 6, rng), grid_of(6, 6, rng)};
    const Grid a = last_scene_forecast(seq);
    const Grid b = ar_forecast(ARModel{{1.0}}, seq);
    ASSERT_EQ(std::memcmp(a.values.data(), b.values.data(), a.size() * sizeof(double)), 0);
  }
}

TEST(AllZeros, ShapeAndValues) {
  const Grid z = all_zeros_forecast(96, 96);
  EXPECT_EQ(z.height, 96u);
  EXPECT_EQ(z.width, 96u);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
}

TEST(ArForecast, UnitFirstCoefficientGivesLastScene) {
  std::mt19937_64 rng(3);
  std::vector<Grid> seq;
  for (int i = 0; i < 6; ++i) seq.push_back(grid_of(3, 3, rng));
  EXPECT_EQ(ar_forecast(ARModel{{1, 0, 0, 0, 0, 0}}, seq), seq.back());
}

TEST(ArForecast, HalfAndHalf) {
  Grid a(1, 2), b(1, 2);
  a.values = {2.0, 4.0};
  b.values = {6.0, -4.0};
  const std::vector<Grid> seq{a, b};
  const Grid f = ar_forecast(ARModel{{0.5, 0.5}}, seq);
  EXPECT_DOUBLE_EQ(f.values[0], 4.0);
  EXPECT_DOUBLE_EQ(f.values[1], 0.0);
}

TEST(ArForecast, RejectsShortSequence) {
  std::mt19937_64 rng(4);
  std::vector<Grid> seq{grid_of(2, 2, rng)};
  EXPECT_THROW(ar_forecast(ARModel{{0.5, 0.5}}, seq), std::invalid_argument);
}

TEST(ArForecast, UsesOnlyTheLastPScenes) {
  std::mt19937_64 rng(5);
  std::vector<Grid> seq{grid_of(3, 3, rng), grid_of(3, 3, rng), grid_of(3, 3, rng)};
  const ARModel m{{0.3, -0.2}};
  const std::vector<Grid> tail{seq[1], seq[2]};
  EXPECT_EQ(ar_forecast(m, seq), ar_forecast(m, tail));
}

TEST(ArForecast, Linear) {
  std::mt19937_64 rng(6);
  const ARModel m{{0.4, 0.3, -0.1}};
  const double alpha = 1.7, beta = -0.6;
  std::vector<Grid> s1, s2, mix;
  for (int i = 0; i < 3; ++i) {
    s1.push_back(grid_of(4, 4, rng));
    s2.push_back(grid_of(4, 4, rng));
    Grid g(4, 4);
    for (std::size_t k = 0; k < g.size(); ++k) g.values[k] = alpha * s1[i].values[k] + beta * s2[i].values[k];
    mix.push_back(g);
  }
  const Grid f = ar_forecast(m, mix), f1 = ar_forecast(m, s1), f2 = ar_forecast(m, s2);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_NEAR(f.values[k], alpha * f1.values[k] + beta * f2.values[k], 1e-12);
}

TEST(ArFit, ClosedFormRecoversNoiselessCoefficient) {
  std::mt19937_64 rng(7);
  const auto windows = ar1_windows(0.9, 200, 1, rng);
  const ARModel m = ar_fit_closed_form(windows, 1);
  ASSERT_EQ(m.order(), 1u);
  EXPECT_NEAR(m.phi[0], 0.9, 1e-8);
}

TEST(ArFit, NoiselessForecastResidualIsTiny) {
  std::mt19937_64 rng(8);
  const ARModel m = ar_fit_closed_form(ar1_windows(0.9, 200, 1, rng), 1);
  Grid prev(5, 5), target(5, 5);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (std::size_t k = 0; k < prev.size(); ++k) {
    prev.values[k] = d(rng);
    target.values[k] = 0.9 * prev.values[k];
  }
  const std::vector<Grid> seq{prev};
  const Grid f = ar_forecast(m, seq);
  double se = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) se += (f.values[k] - target.values[k]) * (f.values[k] - target.values[k]);
  EXPECT_LT(std::sqrt(se / f.size()), 1e-6);
}

TEST(ArFit, PixelWindowsPairHistoryWithTarget) {
  Grid a(1, 2), b(1, 2), t(1, 2);
  a.values = {1, 2};
  b.values = {3, 4};
  t.values = {5, 6};
  const std::vector<Grid> seq{a, b};
  const auto w = pixel_windows(seq, t);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1].history, (std::vector<double>{2, 4}));
  EXPECT_EQ(w[1].target, 6.0);
}

TEST(ArFit, SingularSystemRejectedWithCondition) {
  // Every window is (c, c) -> c, so both lag columns are identical.
  std::vector<PixelWindow> windows;
  for (double c : {1.0, 2.0, -3.0, 4.5}) windows.push_back({{c, c}, c});
  try {
    ar_fit_closed_form(windows, 2);
    FAIL() << "expected SingularSystemError";
  } catch (const SingularSystemError& e) {
    EXPECT_GT(e.condition(), 1e12);
  }
}

TEST(ArFit, ConstantSequencesHaveZeroResidualWhenAllowed) {
  std::vector<PixelWindow> windows;
  for (double c : {1.0, 2.0, -3.0, 4.5}) windows.push_back({{c, c, c}, c});
  const ARModel m = ar_fit_closed_form(windows, 3, {.allow_rank_deficient = true});
  double sum = 0.0;
  for (double v : m.phi) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-10);
  EXPECT_NEAR(ar_training_mse(m, windows), 0.0, 1e-20);
}

TEST(ArFit, RejectsTooFewWindows) {
  std::mt19937_64 rng(9);
  EXPECT_THROW(ar_fit_closed_form(ar1_windows(0.5, 2, 2, rng), 2), std::invalid_argument);
}

// Random stable AR(2) data with noise, small enough for 100 epochs of Adam.
std::vector<PixelWindow> noisy_ar2(std::size_t count, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.1), start(0.0, 1.0);
  std::vector<PixelWindow> out;
  for (std::size_t i = 0; i < count; ++i) {
    double x0 = start(rng), x1 = start(rng);
    const double x2 = 0.6 * x1 + 0.3 * x0 + noise(rng);
    out.push_back({{x0, x1}, x2});
  }
  return out;
}

TEST(ArFit, GradientMatchesClosedFormAndNeverBeatsIt) {
  std::mt19937_64 rng(10);
  const auto windows = noisy_ar2(400, rng);
  const ARModel closed = ar_fit_closed_form(windows, 2);
  const ARModel grad = ar_fit_gradient(windows, 2, {.epochs = 100, .batch_size = 8, .learning_rate = 1e-3, .seed = 3});
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(grad.phi[i], closed.phi[i], 1e-2) << i;
  EXPECT_LE(ar_training_mse(closed, windows), ar_training_mse(grad, windows));
}

TEST(ArFit, GradientFitIsDeterministic) {
  std::mt19937_64 rng(11);
  const auto windows = noisy_ar2(100, rng);
  const GradientFitOptions opts{.epochs = 5, .seed = 42};
  EXPECT_EQ(ar_fit_gradient(windows, 2, opts).phi, ar_fit_gradient(windows, 2, opts).phi);
}

TEST(ArFit, DispatchesOnMethod) {
  std::mt19937_64 rng(12);
  const auto windows = ar1_windows(0.9, 50, 1, rng);
  EXPECT_EQ(ar_fit(windows, 1, FitMethod::closed_form).phi, ar_fit_closed_form(windows, 1).phi);
}

}  // namespace
}  // namespace gapcast::baselines
