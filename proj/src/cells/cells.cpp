#include "gapcast/cells/cells.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gapcast/nd/ops.hpp"

namespace gapcast::cells {
namespace {

using nd::Shape;

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor nonpositive_uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, 0.0);
  auto t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor gate_bias(std::size_t gates, std::size_t hidden, std::ptrdiff_t forget_gate) {
  auto b = Tensor::zeros({gates * hidden}, true);
  if (forget_gate >= 0) {
    auto v = b.data();
    for (std::size_t j = 0; j < hidden; ++j) v[static_cast<std::size_t>(forget_gate) * hidden + j] = 1.0;
  }
  return b;
}

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

std::size_t hidden_of(const Tensor& bias, std::size_t gates) { return bias.dim(0) / gates; }

void check_state(const CellState& s, std::size_t hidden, const char* cell) {
  if (!s.h.defined() || !s.c.defined()) throw std::invalid_argument(std::string(cell) + ": undefined state");
  if (s.h.shape() != s.c.shape()) {
    throw std::invalid_argument(std::string(cell) + ": H " + nd::shape_string(s.h.shape()) + " and C " +
                                nd::shape_string(s.c.shape()) + " differ");
  }
  if (s.h.dim(0) != hidden) {
    throw std::invalid_argument(std::string(cell) + ": state " + nd::shape_string(s.h.shape()) + " does not have " +
                                std::to_string(hidden) + " hidden units");
  }
}

void check_dense(const Tensor& x, const Tensor& w_x, const CellState& s, std::size_t hidden, const char* cell) {
  check_state(s, hidden, cell);
  if (x.rank() < 1 || x.rank() > 2 || x.dim(0) != w_x.dim(1)) {
    throw std::invalid_argument(std::string(cell) + ": input " + nd::shape_string(x.shape()) +
                                " does not match input weights " + nd::shape_string(w_x.shape()));
  }
  if (x.rank() != s.h.rank() || (x.rank() == 2 && x.dim(1) != s.h.dim(1))) {
    throw std::invalid_argument(std::string(cell) + ": input " + nd::shape_string(x.shape()) + " and state " +
                                nd::shape_string(s.h.shape()) + " disagree on pixel count");
  }
}

void check_conv(const Tensor& x, const Tensor& k_x, const CellState& s, std::size_t hidden, const char* cell) {
  check_state(s, hidden, cell);
  if (x.rank() != 3 || x.dim(0) != k_x.dim(1)) {
    throw std::invalid_argument(std::string(cell) + ": input " + nd::shape_string(x.shape()) +
                                " does not match input kernels " + nd::shape_string(k_x.shape()));
  }
  if (s.h.rank() != 3 || s.h.dim(1) != x.dim(1) || s.h.dim(2) != x.dim(2)) {
    throw std::invalid_argument(std::string(cell) + ": spatial mismatch between input " +
                                nd::shape_string(x.shape()) + " and state " + nd::shape_string(s.h.shape()));
  }
}

void check_dt_map(const Tensor& dt_map, const Tensor& x, const char* cell) {
  if (dt_map.rank() != 3 || dt_map.dim(0) != 1 || dt_map.dim(1) != x.dim(1) || dt_map.dim(2) != x.dim(2)) {
    throw std::invalid_argument(std::string(cell) + ": time map " + nd::shape_string(dt_map.shape()) +
                                " does not match input " + nd::shape_string(x.shape()));
  }
  for (double v : dt_map.data()) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(cell) + ": negative or non-finite time map entry");
  }
}

void check_dt(double dt, const char* cell) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument(std::string(cell) + ": elapsed time must be finite and >= 0, got " + std::to_string(dt));
  }
}

Shape dense_time_shape(const Tensor& x) { return x.rank() == 2 ? Shape{1, x.dim(1)} : Shape{1}; }

Tensor gate(Graph& g, const Tensor& stacked, std::size_t index, std::size_t hidden) {
  return nd::slice(g, stacked, index * hidden, hidden);
}

// Shared LSTM tail given pre-activations for i, f, c, o and the previous memory.
CellState lstm_tail(Graph& g, const Tensor& pre_i, const Tensor& pre_f, const Tensor& pre_c, const Tensor& pre_o,
                    const Tensor& c_prev) {
  auto i = nd::sigmoid(g, pre_i);
  auto f = nd::sigmoid(g, pre_f);
  auto cand = nd::tanh(g, pre_c);
  auto o = nd::sigmoid(g, pre_o);
  auto c = nd::add(g, nd::mul(g, f, c_prev), nd::mul(g, i, cand));
  auto h = nd::mul(g, o, nd::tanh(g, c));
  return {h, c};
}

}  // namespace

CellState zero_state(const nd::Shape& shape) { return {Tensor::zeros(shape), Tensor::zeros(shape)}; }

double time_decay(double days) {
  if (!(days >= 0.0)) throw std::invalid_argument("time_decay: negative elapsed time");
  return 1.0 / std::log(std::numbers::e + days);
}

NamedTensors LstmParams::named() { return {{"w_x", &w_x}, {"w_h", &w_h}, {"bias", &bias}}; }
NamedTensors TimeLstmParams::named() {
  return {{"w_x", &w_x}, {"w_h", &w_h}, {"w_t1", &w_t1}, {"w_t2", &w_t2}, {"bias", &bias}};
}
NamedTensors TimeAwareLstmParams::named() {
  return {{"w_x", &w_x}, {"w_h", &w_h}, {"bias", &bias}, {"w_d", &w_d}, {"b_d", &b_d}};
}
NamedTensors ConvLstmParams::named() { return {{"k_x", &k_x}, {"k_h", &k_h}, {"bias", &bias}}; }
NamedTensors ConvTimeLstmParams::named() {
  return {{"k_x", &k_x}, {"k_h", &k_h}, {"k_t1", &k_t1}, {"k_t2", &k_t2}, {"k_to", &k_to}, {"bias", &bias}};
}
NamedTensors ConvTimeAwareLstmParams::named() {
  return {{"k_x", &k_x}, {"k_h", &k_h}, {"bias", &bias}, {"k_d", &k_d}, {"b_d", &b_d}};
}

LstmParams init_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  LstmParams p;
  p.w_x = uniform({4 * hidden, in}, fan_in_bound(in), rng);
  p.w_h = uniform({4 * hidden, hidden}, fan_in_bound(hidden), rng);
  p.bias = gate_bias(4, hidden, 1);
  return p;
}

TimeLstmParams init_time_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  TimeLstmParams p;
  p.w_x = uniform({5 * hidden, in}, fan_in_bound(in), rng);
  p.w_h = uniform({3 * hidden, hidden}, fan_in_bound(hidden), rng);
  p.w_t1 = nonpositive_uniform({hidden, 1}, 1.0, rng);
  p.w_t2 = uniform({hidden, 1}, 1.0, rng);
  p.bias = gate_bias(5, hidden, -1);
  return p;
}

TimeAwareLstmParams init_time_aware_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  TimeAwareLstmParams p;
  p.w_x = uniform({4 * hidden, in}, fan_in_bound(in), rng);
  p.w_h = uniform({4 * hidden, hidden}, fan_in_bound(hidden), rng);
  p.bias = gate_bias(4, hidden, 1);
  p.w_d = uniform({hidden, hidden}, fan_in_bound(hidden), rng);
  p.b_d = Tensor::zeros({hidden}, true);
  return p;
}

ConvLstmParams init_conv_lstm(std::size_t in, std::size_t hidden, std::size_t kernel, std::mt19937_64& rng) {
  ConvLstmParams p;
  p.k_x = uniform({4 * hidden, in, kernel, kernel}, fan_in_bound(in * kernel * kernel), rng);
  p.k_h = uniform({4 * hidden, hidden, kernel, kernel}, fan_in_bound(hidden * kernel * kernel), rng);
  p.bias = gate_bias(4, hidden, 1);
  return p;
}

ConvTimeLstmParams init_conv_time_lstm(std::size_t in, std::size_t hidden, std::size_t kernel, std::mt19937_64& rng) {
  ConvTimeLstmParams p;
  const double time_bound = fan_in_bound(kernel * kernel);
  p.k_x = uniform({5 * hidden, in, kernel, kernel}, fan_in_bound(in * kernel * kernel), rng);
  p.k_h = uniform({3 * hidden, hidden, kernel, kernel}, fan_in_bound(hidden * kernel * kernel), rng);
  p.k_t1 = nonpositive_uniform({hidden, 1, kernel, kernel}, time_bound, rng);
  p.k_t2 = uniform({hidden, 1, kernel, kernel}, time_bound, rng);
  p.k_to = uniform({hidden, 1, kernel, kernel}, time_bound, rng);
  p.bias = gate_bias(5, hidden, -1);
  return p;
}

ConvTimeAwareLstmParams init_conv_time_aware_lstm(std::size_t in, std::size_t hidden, std::size_t kernel,
                                                  std::mt19937_64& rng) {
  ConvTimeAwareLstmParams p;
  p.k_x = uniform({4 * hidden, in, kernel, kernel}, fan_in_bound(in * kernel * kernel), rng);
  p.k_h = uniform({4 * hidden, hidden, kernel, kernel}, fan_in_bound(hidden * kernel * kernel), rng);
  p.bias = gate_bias(4, hidden, 1);
  p.k_d = uniform({hidden, hidden, kernel, kernel}, fan_in_bound(hidden * kernel * kernel), rng);
  p.b_d = Tensor::zeros({hidden}, true);
  return p;
}

CellState lstm_step(Graph& g, const LstmParams& p, const Tensor& x, const CellState& state) {
  const std::size_t h = hidden_of(p.bias, 4);
  check_dense(x, p.w_x, state, h, "lstm_step");
  auto pre = nd::add(g, nd::affine(g, x, p.w_x, p.bias), nd::affine(g, state.h, p.w_h));
  return lstm_tail(g, gate(g, pre, 0, h), gate(g, pre, 1, h), gate(g, pre, 2, h), gate(g, pre, 3, h), state.c);
}

CellState convlstm_step(Graph& g, const ConvLstmParams& p, const Tensor& x, const CellState& state) {
  const std::size_t h = hidden_of(p.bias, 4);
  check_conv(x, p.k_x, state, h, "convlstm_step");
  auto pre = nd::add(g, nd::conv2d(g, x, p.k_x, p.bias), nd::conv2d(g, state.h, p.k_h));
  return lstm_tail(g, gate(g, pre, 0, h), gate(g, pre, 1, h), gate(g, pre, 2, h), gate(g, pre, 3, h), state.c);
}

namespace {

// Time-gated memory update shared by the dense and convolutional Time-LSTM.
// xs: [5h] pre-activations from the input (+bias); hs: [3h] from the hidden
// state; tt1, tt2: inner time terms; to: optional output-gate time term.
CellState time_lstm_tail(Graph& g, const Tensor& xs, const Tensor& hs, const Tensor& tt1, const Tensor& tt2,
                         const Tensor& to, const Tensor& c_prev, std::size_t h, Squash output) {
  auto i = nd::sigmoid(g, nd::add(g, gate(g, xs, 0, h), gate(g, hs, 0, h)));
  auto t1 = nd::sigmoid(g, nd::add(g, gate(g, xs, 1, h), nd::sigmoid(g, tt1)));
  auto t2 = nd::sigmoid(g, nd::add(g, gate(g, xs, 2, h), nd::sigmoid(g, tt2)));
  auto cand = nd::sigmoid(g, nd::add(g, gate(g, xs, 3, h), gate(g, hs, 1, h)));
  auto pre_o = nd::add(g, gate(g, xs, 4, h), gate(g, hs, 2, h));
  if (to.defined()) pre_o = nd::add(g, pre_o, to);
  auto o = nd::sigmoid(g, pre_o);

  auto it1 = nd::mul(g, i, t1);
  auto c_tilde = nd::add(g, nd::mul(g, nd::one_minus(g, it1), c_prev), nd::mul(g, it1, cand));
  auto c = nd::add(g, nd::mul(g, nd::one_minus(g, i), c_prev), nd::mul(g, nd::mul(g, i, t2), cand));
  auto squashed = output == Squash::tanh ? nd::tanh(g, c_tilde) : nd::sigmoid(g, c_tilde);
  return {nd::mul(g, o, squashed), c};
}

CellState time_aware_tail(Graph& g, const Tensor& pre, const Tensor& short_term, const Tensor& decay,
                          const Tensor& c_prev, std::size_t h) {
  auto discounted = nd::mul(g, short_term, decay);
  auto long_term = nd::sub(g, c_prev, short_term);
  auto adjusted = nd::add(g, long_term, discounted);
  return lstm_tail(g, gate(g, pre, 0, h), gate(g, pre, 1, h), gate(g, pre, 2, h), gate(g, pre, 3, h), adjusted);
}

}  // namespace

CellState timelstm_step(Graph& g, const TimeLstmParams& p, const Tensor& x, double dt_days, const CellState& state,
                        double time_scale_days, Squash output) {
  const std::size_t h = hidden_of(p.bias, 5);
  check_dense(x, p.w_x, state, h, "timelstm_step");
  check_dt(dt_days, "timelstm_step");
  auto dt = Tensor::filled(dense_time_shape(x), dt_days / time_scale_days);
  auto xs = nd::affine(g, x, p.w_x, p.bias);
  auto hs = nd::affine(g, state.h, p.w_h);
  auto tt1 = nd::affine(g, dt, p.w_t1);
  auto tt2 = nd::affine(g, dt, p.w_t2);
  return time_lstm_tail(g, xs, hs, tt1, tt2, Tensor{}, state.c, h, output);
}

Tensor timelstm_time_gate1(Graph& g, const TimeLstmParams& p, const Tensor& x, double dt_days,
                           double time_scale_days) {
  const std::size_t h = hidden_of(p.bias, 5);
  if (x.rank() < 1 || x.rank() > 2 || x.dim(0) != p.w_x.dim(1)) {
    throw std::invalid_argument("timelstm_time_gate1: input " + nd::shape_string(x.shape()) +
                                " does not match input weights " + nd::shape_string(p.w_x.shape()));
  }
  check_dt(dt_days, "timelstm_time_gate1");
  auto dt = Tensor::filled(dense_time_shape(x), dt_days / time_scale_days);
  auto xs = nd::affine(g, x, p.w_x, p.bias);
  return nd::sigmoid(g, nd::add(g, gate(g, xs, 1, h), nd::sigmoid(g, nd::affine(g, dt, p.w_t1))));
}

CellState convtimelstm_step(Graph& g, const ConvTimeLstmParams& p, const Tensor& x, const Tensor& dt_map,
                            const CellState& state, double time_scale_days) {
  const std::size_t h = hidden_of(p.bias, 5);
  check_conv(x, p.k_x, state, h, "convtimelstm_step");
  check_dt_map(dt_map, x, "convtimelstm_step");
  auto dt = dt_map.clone();
  for (auto& v : dt.data()) v /= time_scale_days;
  auto xs = nd::conv2d(g, x, p.k_x, p.bias);
  auto hs = nd::conv2d(g, state.h, p.k_h);
  auto tt1 = nd::conv2d(g, dt, p.k_t1);
  auto tt2 = nd::conv2d(g, dt, p.k_t2);
  auto to = nd::conv2d(g, dt, p.k_to);
  return time_lstm_tail(g, xs, hs, tt1, tt2, to, state.c, h, Squash::sigmoid);
}

CellState timeawarelstm_step(Graph& g, const TimeAwareLstmParams& p, const Tensor& x, double dt_days,
                             const CellState& state) {
  const std::size_t h = hidden_of(p.bias, 4);
  check_dense(x, p.w_x, state, h, "timeawarelstm_step");
  check_dt(dt_days, "timeawarelstm_step");
  auto pre = nd::add(g, nd::affine(g, x, p.w_x, p.bias), nd::affine(g, state.h, p.w_h));
  auto short_term = nd::tanh(g, nd::affine(g, state.c, p.w_d, p.b_d));
  auto decay = Tensor::filled(state.c.shape(), time_decay(dt_days));
  return time_aware_tail(g, pre, short_term, decay, state.c, h);
}

CellState convtimeawarelstm_step(Graph& g, const ConvTimeAwareLstmParams& p, const Tensor& x, const Tensor& dt_map,
                                 const CellState& state) {
  const std::size_t h = hidden_of(p.bias, 4);
  check_conv(x, p.k_x, state, h, "convtimeawarelstm_step");
  check_dt_map(dt_map, x, "convtimeawarelstm_step");
  auto pre = nd::add(g, nd::conv2d(g, x, p.k_x, p.bias), nd::conv2d(g, state.h, p.k_h));
  auto short_term = nd::tanh(g, nd::conv2d(g, state.c, p.k_d, p.b_d));
  const std::size_t plane = dt_map.size();
  auto decay = Tensor::zeros(state.c.shape());
  auto dst = decay.data();
  auto src = dt_map.data();
  for (std::size_t i = 0; i < plane; ++i) {
    const double gi = time_decay(src[i]);
    for (std::size_t ch = 0; ch < h; ++ch) dst[ch * plane + i] = gi;
  }
  return time_aware_tail(g, pre, short_term, decay, state.c, h);
}

}  // namespace gapcast::cells
