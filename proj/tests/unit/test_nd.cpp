#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gapcast/nd/adam.hpp"
#include "gapcast/nd/ops.hpp"
#include "support/gradcheck.hpp"

using namespace gapcast;
using nd::Graph;
using nd::Tensor;
using oracle::check_gradients;
using oracle::random_tensor;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Elementwise, SigmoidOfZeroIsHalf) {
  Graph g(false);
  EXPECT_DOUBLE_EQ(nd::sigmoid(g, Tensor::scalar(0.0)).item(), 0.5);
}

TEST(Elementwise, HadamardProduct) {
  Graph g(false);
  auto y = nd::mul(g, Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 4}));
  EXPECT_EQ(values(y), (std::vector<double>{3, 8}));
}

TEST(Elementwise, TanhGradientMatchesFiniteDifference) {
  auto x = Tensor::scalar(0.3, true);
  Graph g;
  auto y = nd::tanh(g, x);
  g.backward(y);
  const double h = 1e-6;
  const double numeric = (std::tanh(0.3 + h) - std::tanh(0.3 - h)) / (2 * h);
  EXPECT_LT(std::abs(x.grad()[0] - numeric) / std::abs(numeric), 1e-6);
}

TEST(Elementwise, ShapeMismatchReportsBothShapes) {
  Graph g(false);
  try {
    nd::add(g, Tensor::zeros({2}), Tensor::zeros({3}));
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("[2]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[3]"), std::string::npos);
  }
}

TEST(Affine, IdentityWeights) {
  Graph g(false);
  auto y = nd::affine(g, Tensor::from({2}, {2, -1}), Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::zeros({2}));
  EXPECT_EQ(values(y), (std::vector<double>{2, -1}));
}

TEST(Affine, HandArithmetic) {
  Graph g(false);
  auto y = nd::affine(g, Tensor::from({2}, {1, 2}), Tensor::from({2, 2}, {1, 1, 0, 2}), Tensor::from({2}, {1, 0}));
  EXPECT_EQ(values(y), (std::vector<double>{4, 4}));
}

TEST(Affine, DimensionMismatchRejected) {
  Graph g(false);
  EXPECT_THROW(nd::affine(g, Tensor::zeros({3}), Tensor::zeros({2, 2})), std::invalid_argument);
}

TEST(Affine, GradientCheck) {
  std::mt19937_64 rng(11);
  auto w = random_tensor({4, 3}, rng);
  auto x = random_tensor({3}, rng);
  auto b = random_tensor({4}, rng);
  auto target = random_tensor({4}, rng, -1, 1, false);
  auto report = check_gradients({{"w", w}, {"x", x}, {"b", b}},
                                [&](Graph& g) { return nd::mse_loss(g, nd::affine(g, x, w, b), target); });
  EXPECT_LT(report.worst(), 1e-6) << report.worst_name();
}

TEST(Conv2d, OneByOneIdentityKernel) {
  std::mt19937_64 rng(3);
  auto x = random_tensor({1, 4, 5}, rng, -1, 1, false);
  Graph g(false);
  auto y = nd::conv2d(g, x, Tensor::filled({1, 1, 1, 1}, 1.0), Tensor::zeros({1}));
  EXPECT_EQ(values(y), values(x));
}

TEST(Conv2d, AllOnesKernelCountsOverlap) {
  Graph g(false);
  auto y = nd::conv2d(g, Tensor::filled({1, 3, 3}, 1.0), Tensor::filled({1, 1, 3, 3}, 1.0));
  auto v = values(y);
  EXPECT_DOUBLE_EQ(v[4], 9.0);
  EXPECT_DOUBLE_EQ(v[0], 4.0);
  EXPECT_DOUBLE_EQ(v[2], 4.0);
  EXPECT_DOUBLE_EQ(v[6], 4.0);
  EXPECT_DOUBLE_EQ(v[8], 4.0);
  EXPECT_DOUBLE_EQ(v[1], 6.0);
}

TEST(Conv2d, EvenKernelRejected) {
  Graph g(false);
  EXPECT_THROW(nd::conv2d(g, Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 2, 2})), std::invalid_argument);
}

TEST(Conv2d, GradientCheck) {
  std::mt19937_64 rng(5);
  auto k = random_tensor({2, 2, 3, 3}, rng);
  auto x = random_tensor({2, 5, 5}, rng);
  auto b = random_tensor({2}, rng);
  auto target = random_tensor({2, 5, 5}, rng, -1, 1, false);
  auto report = check_gradients({{"k", k}, {"x", x}, {"b", b}},
                                [&](Graph& g) { return nd::mse_loss(g, nd::conv2d(g, x, k, b), target); });
  EXPECT_LT(report.worst(), 1e-5) << report.worst_name();
}

TEST(Conv2d, MatchesBruteForceLoops) {
  std::mt19937_64 rng(8);
  auto x = random_tensor({3, 6, 7}, rng, -1, 1, false);
  auto k = random_tensor({2, 3, 5, 5}, rng, -1, 1, false);
  Graph g(false);
  auto y = nd::conv2d(g, x, k);
  const int H = 6, W = 7, K = 5, P = 2;
  auto xv = x.data();
  auto kv = k.data();
  for (int co = 0; co < 2; ++co)
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        double acc = 0.0;
        for (int ci = 0; ci < 3; ++ci)
          for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
              const int sr = r + ky - P, sc = c + kx - P;
              if (sr < 0 || sr >= H || sc < 0 || sc >= W) continue;
              acc += kv[((co * 3 + ci) * K + ky) * K + kx] * xv[(ci * H + sr) * W + sc];
            }
        EXPECT_NEAR(y.data()[(co * H + r) * W + c], acc, 1e-12);
      }
}

TEST(Pooling, MaxOfBlock) {
  Graph g(false);
  auto y = nd::pool2(g, Tensor::from({1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(y.shape(), (nd::Shape{1, 1, 1}));
  EXPECT_EQ(y.item(), 4.0);
}

TEST(Pooling, UpsampleReplicates) {
  Graph g(false);
  auto y = nd::upsample2(g, Tensor::from({1, 1, 1}, {5}));
  EXPECT_EQ(values(y), (std::vector<double>{5, 5, 5, 5}));
}

TEST(Pooling, RoundTripOnConstantIsIdentity) {
  Graph g(false);
  auto x = Tensor::filled({2, 4, 6}, 1.5);
  auto y = nd::upsample2(g, nd::pool2(g, x));
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(values(y), values(x));
}

TEST(Pooling, OddExtentRejected) {
  Graph g(false);
  EXPECT_THROW(nd::pool2(g, Tensor::zeros({1, 3, 4})), std::invalid_argument);
}

TEST(Pooling, GradientCheck) {
  std::mt19937_64 rng(9);
  auto x = random_tensor({2, 4, 4}, rng);
  auto target = random_tensor({2, 4, 4}, rng, -1, 1, false);
  auto report = check_gradients(
      {{"x", x}}, [&](Graph& g) { return nd::mse_loss(g, nd::upsample2(g, nd::pool2(g, x)), target); });
  EXPECT_LT(report.worst(), 1e-6);
}

TEST(MseLoss, Values) {
  Graph g(false);
  auto t = Tensor::from({2}, {3, 4});
  EXPECT_EQ(nd::mse_loss(g, t, t).item(), 0.0);
  EXPECT_DOUBLE_EQ(nd::mse_loss(g, Tensor::zeros({2}), t).item(), 12.5);
  EXPECT_THROW(nd::mse_loss(g, Tensor::zeros({2}), Tensor::zeros({3})), std::invalid_argument);
}

TEST(MseLoss, GradientCheck) {
  std::mt19937_64 rng(4);
  auto p = random_tensor({7}, rng);
  auto t = random_tensor({7}, rng, -1, 1, false);
  auto report = check_gradients({{"p", p}}, [&](Graph& g) { return nd::mse_loss(g, p, t); });
  EXPECT_LT(report.worst(), 1e-8);
}

TEST(Graph, AccumulatesAcrossConsumers) {
  auto x = Tensor::scalar(1.7, true);
  Graph g;
  auto y = nd::add(g, nd::mul(g, x, x), x);
  g.backward(y);
  EXPECT_NEAR(x.grad()[0], 2 * 1.7 + 1, 1e-15);
  EXPECT_THROW(g.backward(y), std::logic_error);
}

TEST(Graph, ConvOneByOneEqualsAffine) {
  std::mt19937_64 rng(12);
  auto x = random_tensor({5, 1, 1}, rng, -1, 1, false);
  auto k = random_tensor({3, 5, 1, 1}, rng, -1, 1, false);
  auto b = random_tensor({3}, rng, -1, 1, false);
  Graph g(false);
  auto conv = nd::conv2d(g, x, k, b);
  auto aff = nd::affine(g, Tensor::from({5}, values(x)), Tensor::from({3, 5}, values(k)), b);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(conv.data()[i], aff.data()[i], 1e-12);
}

TEST(GraphProperty, EveryOpMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_tensor({2, 4, 4}, rng);
    auto b = random_tensor({2, 4, 4}, rng);
    auto k = random_tensor({3, 4, 3, 3}, rng);
    auto target = random_tensor({3, 4, 4}, rng, -1, 1, false);
    auto report = check_gradients({{"a", a}, {"b", b}, {"k", k}}, [&](Graph& g) {
      auto s = nd::sigmoid(g, a);
      auto t = nd::tanh(g, b);
      auto m = nd::mul(g, s, nd::one_minus(g, t));
      auto d = nd::sub(g, nd::scale_shift(g, m, 1.5, 0.2), nd::elementwise(g, nd::Unary::negate, a));
      auto cat = nd::concat(g, std::vector<Tensor>{d, nd::add(g, a, b)});
      auto y = nd::conv2d(g, cat, k);
      auto r = nd::reshape(g, nd::slice(g, nd::upsample2(g, nd::pool2(g, y)), 0, 3), {3, 4, 4});
      return nd::mse_loss(g, nd::add_n(g, std::vector<Tensor>{r, y, y}), target);
    });
    EXPECT_LT(report.worst(), 1e-4) << "trial " << trial << " " << report.worst_name();
  }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto w = Tensor::from({3}, {0.5, -1.0, 2.0}, true);
  w.grad();
  nd::Adam opt({w}, {});
  EXPECT_EQ(opt.step(), nd::StepStatus::applied);
  EXPECT_EQ(values(w), (std::vector<double>{0.5, -1.0, 2.0}));
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Adam, FirstStepIsLearningRate) {
  auto w = Tensor::scalar(0.0, true);
  w.grad()[0] = 1.0;
  nd::Adam opt({w}, {.learning_rate = 0.1});
  opt.step();
  EXPECT_NEAR(w.item(), -0.1, 1e-8);
}

TEST(Adam, ConvergesOnQuadratic) {
  auto w = Tensor::scalar(0.0, true);
  nd::Adam opt({w}, {.learning_rate = 0.1});
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    w.grad()[0] = 2.0 * (w.item() - 3.0);
    opt.step();
  }
  EXPECT_LT(std::abs(w.item() - 3.0), 0.05);
}

TEST(Adam, NonFiniteGradientAbortsStep) {
  auto w = Tensor::scalar(1.0, true);
  w.grad()[0] = std::nan("");
  nd::Adam opt({w}, {});
  EXPECT_EQ(opt.step(), nd::StepStatus::non_finite_gradient);
  EXPECT_EQ(w.item(), 1.0);
  EXPECT_EQ(opt.step_count(), 0u);
}

TEST(Adam, WeightDecayShrinksWithoutGradient) {
  auto w = Tensor::scalar(1.0, true);
  w.grad();
  nd::Adam opt({w}, {.learning_rate = 0.01, .weight_decay = 0.5});
  opt.step();
  EXPECT_LT(w.item(), 1.0);
}

TEST(ProjectNonpositive, ClampsAndIsIdempotent) {
  auto w = Tensor::from({3}, {-1, 0.5, 0});
  nd::project_nonpositive(w);
  EXPECT_EQ(values(w), (std::vector<double>{-1, 0, 0}));
  auto again = w.clone();
  nd::project_nonpositive(again);
  EXPECT_EQ(values(again), values(w));
}
