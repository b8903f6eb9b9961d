#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gapcast/nd/graph.hpp"
#include "gapcast/nd/tensor.hpp"

// Recurrent cells over two tensor layouts:
//   dense         [features, P]     P pixels treated as independent columns
//   convolutional [channels, H, W]
// Gate weights are stacked along the leading axis in the order listed next to
// each parameter block, so a dense [G*h, in] matrix has the same memory layout
// as a [G*h, in, 1, 1] convolution kernel.

namespace gapcast::cells {

using nd::Graph;
using nd::Tensor;

/// Hidden state H and cell memory C of one recurrent layer.
struct CellState {
  Tensor h;
  Tensor c;
};

CellState zero_state(const nd::Shape& shape);

/// Discount for short-term memory: 1 / log(e + days). g(0) = 1, non-increasing.
double time_decay(double days);

/// Default divisor applied to elapsed days before they enter learned gates.
inline constexpr double kDefaultTimeScaleDays = 37.0;

enum class Squash { tanh, sigmoid };

using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;

// Gate order: input, forget, candidate, output.
struct LstmParams {
  Tensor w_x;   // [4h, in]
  Tensor w_h;   // [4h, h]
  Tensor bias;  // [4h]
  NamedTensors named();
};

// x-gates: input, time1, time2, candidate, output. h-gates: input, candidate, output.
struct TimeLstmParams {
  Tensor w_x;   // [5h, in]
  Tensor w_h;   // [3h, h]
  Tensor w_t1;  // [h, 1], constrained <= 0
  Tensor w_t2;  // [h, 1]
  Tensor bias;  // [5h]
  NamedTensors named();
};

// Gate order: input, forget, candidate, output.
struct TimeAwareLstmParams {
  Tensor w_x;   // [4h, in]
  Tensor w_h;   // [4h, h]
  Tensor bias;  // [4h]
  Tensor w_d;   // [h, h] short-term memory extraction
  Tensor b_d;   // [h]
  NamedTensors named();
};

struct ConvLstmParams {
  Tensor k_x;   // [4h, Cin, k, k]
  Tensor k_h;   // [4h, h, k, k]
  Tensor bias;  // [4h]
  NamedTensors named();
};

struct ConvTimeLstmParams {
  Tensor k_x;    // [5h, Cin, k, k]
  Tensor k_h;    // [3h, h, k, k]
  Tensor k_t1;   // [h, 1, k, k], constrained <= 0
  Tensor k_t2;   // [h, 1, k, k]
  Tensor k_to;   // [h, 1, k, k] elapsed-time term of the output gate
  Tensor bias;   // [5h]
  NamedTensors named();
};

struct ConvTimeAwareLstmParams {
  Tensor k_x;   // [4h, Cin, k, k]
  Tensor k_h;   // [4h, h, k, k]
  Tensor bias;  // [4h]
  Tensor k_d;   // [h, h, k, k]
  Tensor b_d;   // [h]
  NamedTensors named();
};

// Initialisation: uniform in +-1/sqrt(fan_in), biases zero except forget-gate
// bias 1, time-gate weights drawn non-positive where constrained.
LstmParams init_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng);
TimeLstmParams init_time_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng);
TimeAwareLstmParams init_time_aware_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng);
ConvLstmParams init_conv_lstm(std::size_t in, std::size_t hidden, std::size_t kernel, std::mt19937_64& rng);
ConvTimeLstmParams init_conv_time_lstm(std::size_t in, std::size_t hidden, std::size_t kernel, std::mt19937_64& rng);
ConvTimeAwareLstmParams init_conv_time_aware_lstm(std::size_t in, std::size_t hidden, std::size_t kernel,
                                                  std::mt19937_64& rng);

CellState lstm_step(Graph& g, const LstmParams& p, const Tensor& x, const CellState& state);

/// dt_days: time following the observation. Output squash defaults to tanh;
/// sigmoid matches the convolutional variant's output nonlinearity.
CellState timelstm_step(Graph& g, const TimeLstmParams& p, const Tensor& x, double dt_days, const CellState& state,
                        double time_scale_days = kDefaultTimeScaleDays, Squash output = Squash::tanh);

/// First time gate of the dense Time-LSTM on its own; depends only on x and dt.
Tensor timelstm_time_gate1(Graph& g, const TimeLstmParams& p, const Tensor& x, double dt_days,
                           double time_scale_days = kDefaultTimeScaleDays);

/// dt_days: time preceding the observation.
CellState timeawarelstm_step(Graph& g, const TimeAwareLstmParams& p, const Tensor& x, double dt_days,
                             const CellState& state);

CellState convlstm_step(Graph& g, const ConvLstmParams& p, const Tensor& x, const CellState& state);

/// dt_map: [1, H, W] elapsed days per pixel (time following the observation).
CellState convtimelstm_step(Graph& g, const ConvTimeLstmParams& p, const Tensor& x, const Tensor& dt_map,
                            const CellState& state, double time_scale_days = kDefaultTimeScaleDays);

/// dt_map: [1, H, W] elapsed days per pixel (time preceding the observation).
CellState convtimeawarelstm_step(Graph& g, const ConvTimeAwareLstmParams& p, const Tensor& x, const Tensor& dt_map,
                                 const CellState& state);

}  // namespace gapcast::cells
