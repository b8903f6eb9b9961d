#include "gapcast/cells/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gapcast/nd/ops.hpp"

namespace gapcast::cells {

std::string_view to_string(CellKind kind) {
  switch (kind) {
    case CellKind::lstm: return "lstm";
    case CellKind::time_lstm: return "time_lstm";
    case CellKind::time_aware_lstm: return "time_aware_lstm";
    case CellKind::conv_lstm: return "conv_lstm";
    case CellKind::conv_time_lstm: return "conv_time_lstm";
    case CellKind::conv_time_aware_lstm: return "conv_time_aware_lstm";
  }
  return "unknown";
}

CellKind parse_cell_kind(std::string_view name) {
  for (auto kind : {CellKind::lstm, CellKind::time_lstm, CellKind::time_aware_lstm, CellKind::conv_lstm,
                    CellKind::conv_time_lstm, CellKind::conv_time_aware_lstm}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown cell kind '" + std::string(name) + "'");
}

bool is_convolutional(CellKind kind) {
  return kind == CellKind::conv_lstm || kind == CellKind::conv_time_lstm || kind == CellKind::conv_time_aware_lstm;
}

TimeConvention time_convention(CellKind kind) {
  switch (kind) {
    case CellKind::time_lstm:
    case CellKind::conv_time_lstm: return TimeConvention::following;
    case CellKind::time_aware_lstm:
    case CellKind::conv_time_aware_lstm: return TimeConvention::preceding;
    default: return TimeConvention::none;
  }
}

void ModelSpec::validate() const {
  if (hidden_dims.empty()) throw std::invalid_argument("model needs at least one hidden layer");
  if (std::find(hidden_dims.begin(), hidden_dims.end(), 0u) != hidden_dims.end()) {
    throw std::invalid_argument("hidden dimensions must be positive");
  }
  if (window_length < 1) throw std::invalid_argument("window length must be at least 1");
  if (input_channels < 1) throw std::invalid_argument("input channels must be at least 1");
  if (!(time_scale_days > 0.0)) throw std::invalid_argument("time scale must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
  if (is_convolutional(kind) && kernel_size % 2 == 0) {
    throw std::invalid_argument("kernel size must be odd, got " + std::to_string(kernel_size));
  }
  if (unet) {
    if (!is_convolutional(kind)) throw std::invalid_argument("U-Net composition requires a convolutional cell");
    if (hidden_dims.size() < 3 || hidden_dims.size() % 2 == 0) {
      throw std::invalid_argument("U-Net requires an odd number (>= 3) of layers");
    }
    if (!std::equal(hidden_dims.begin(), hidden_dims.end(), hidden_dims.rbegin())) {
      throw std::invalid_argument("U-Net hidden dimensions must be palindromic");
    }
  }
}

namespace {

LayerParams init_layer(CellKind kind, std::size_t in, std::size_t hidden, std::size_t k, std::mt19937_64& rng) {
  switch (kind) {
    case CellKind::lstm: return init_lstm(in, hidden, rng);
    case CellKind::time_lstm: return init_time_lstm(in, hidden, rng);
    case CellKind::time_aware_lstm: return init_time_aware_lstm(in, hidden, rng);
    case CellKind::conv_lstm: return init_conv_lstm(in, hidden, k, rng);
    case CellKind::conv_time_lstm: return init_conv_time_lstm(in, hidden, k, rng);
    case CellKind::conv_time_aware_lstm: return init_conv_time_aware_lstm(in, hidden, k, rng);
  }
  throw std::logic_error("unhandled cell kind");
}

NamedTensors named_of(LayerParams& params) {
  return std::visit([](auto& p) { return p.named(); }, params);
}

bool is_constrained(const LayerParams& params, const std::string& name) {
  return (std::holds_alternative<TimeLstmParams>(params) && name == "w_t1") ||
         (std::holds_alternative<ConvTimeLstmParams>(params) && name == "k_t1");
}

Tensor frame_for_dense(Graph& g, const Tensor& frame) {
  return nd::reshape(g, frame, {frame.dim(0), frame.dim(1) * frame.dim(2)});
}

}  // namespace

CellState step_layer(Graph& g, const Layer& layer, const Tensor& x, double dt_days, const Tensor& dt_map,
                     const CellState& state, double time_scale_days) {
  return std::visit(
      [&](const auto& p) -> CellState {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LstmParams>) {
          return lstm_step(g, p, x, state);
        } else if constexpr (std::is_same_v<P, TimeLstmParams>) {
          return timelstm_step(g, p, x, dt_days, state, time_scale_days);
        } else if constexpr (std::is_same_v<P, TimeAwareLstmParams>) {
          return timeawarelstm_step(g, p, x, dt_days, state);
        } else if constexpr (std::is_same_v<P, ConvLstmParams>) {
          return convlstm_step(g, p, x, state);
        } else if constexpr (std::is_same_v<P, ConvTimeLstmParams>) {
          return convtimelstm_step(g, p, x, dt_map, state, time_scale_days);
        } else {
          return convtimeawarelstm_step(g, p, x, dt_map, state);
        }
      },
      layer.params);
}

Forecaster::Forecaster(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  const auto& dims = spec_.hidden_dims;
  const std::size_t n = dims.size();
  const std::size_t k = spec_.kernel_size;
  const std::size_t mid = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    Layer layer;
    layer.hidden = dims[i];
    if (i == 0) {
      layer.input_channels = spec_.input_channels;
    } else if (spec_.unet && i > mid) {
      layer.input_channels = 2 * dims[n - 1 - i];
      layer.level = n - 1 - i;
    } else {
      layer.input_channels = dims[i - 1];
    }
    if (spec_.unet && i <= mid) layer.level = i;
    layer.params = init_layer(spec_.kind, layer.input_channels, layer.hidden, k, rng);
    if (spec_.unet && i > mid) {
      const std::size_t skip = dims[n - 1 - i];
      std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(static_cast<double>(dims[i - 1])),
                                                  1.0 / std::sqrt(static_cast<double>(dims[i - 1])));
      layer.up_kernel = Tensor::zeros({skip, dims[i - 1], 1, 1}, true);
      for (auto& v : layer.up_kernel.data()) v = dist(rng);
      layer.up_bias = Tensor::zeros({skip}, true);
    }
    layers_.push_back(std::move(layer));
  }
  const std::size_t last = dims.back();
  std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(static_cast<double>(last)),
                                              1.0 / std::sqrt(static_cast<double>(last)));
  head_w_ = is_convolutional(spec_.kind) ? Tensor::zeros({1, last, 1, 1}, true) : Tensor::zeros({1, last}, true);
  for (auto& v : head_w_.data()) v = dist(rng);
  head_b_ = Tensor::zeros({1}, true);
}

std::vector<NamedParameter> Forecaster::parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto params = layers_[i].params;  // handles share storage
    const std::string prefix = "layer" + std::to_string(i) + ".";
    for (auto& [name, tensor] : named_of(params)) {
      out.push_back({prefix + name, *tensor, is_constrained(params, name)});
    }
    if (layers_[i].up_kernel.defined()) {
      out.push_back({prefix + "up_kernel", layers_[i].up_kernel, false});
      out.push_back({prefix + "up_bias", layers_[i].up_bias, false});
    }
  }
  out.push_back({"head.weight", head_w_, false});
  out.push_back({"head.bias", head_b_, false});
  return out;
}

std::size_t Forecaster::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor.size();
  return total;
}

void Forecaster::check_input(const ForecastInput& input) const {
  const std::size_t n = spec_.window_length;
  if (input.frames.size() != n) {
    throw std::invalid_argument("expected " + std::to_string(n) + " input frames, got " +
                                std::to_string(input.frames.size()));
  }
  const auto& shape = input.frames.front().shape();
  if (shape.size() != 3 || shape[0] != spec_.input_channels) {
    throw std::invalid_argument("frames must be [" + std::to_string(spec_.input_channels) + ", H, W], got " +
                                nd::shape_string(shape));
  }
  for (const auto& f : input.frames) {
    if (f.shape() != shape) throw std::invalid_argument("frames differ in shape");
  }
  const auto convention = time_convention(spec_.kind);
  if (convention == TimeConvention::none) return;
  if (is_convolutional(spec_.kind)) {
    if (input.dt_maps.size() != n) throw std::invalid_argument("expected one time map per input frame");
  } else if (input.dt_days.size() != n) {
    throw std::invalid_argument("expected one elapsed-time value per input frame");
  }
}

Tensor downsample_time_map(const Tensor& map) {
  const std::size_t h = map.dim(1), w = map.dim(2);
  if (h % 2 || w % 2) throw std::invalid_argument("time map extents must be even to downsample");
  auto out = Tensor::zeros({1, h / 2, w / 2});
  auto src = map.data();
  auto dst = out.data();
  for (std::size_t y = 0; y < h / 2; ++y)
    for (std::size_t x = 0; x < w / 2; ++x) {
      const std::size_t b = 2 * y * w + 2 * x;
      dst[y * (w / 2) + x] = 0.25 * (src[b] + src[b + 1] + src[b + w] + src[b + w + 1]);
    }
  return out;
}

Tensor unet_forward(Graph& g, const std::vector<Layer>& layers, const ForecastInput& input, double time_scale_days,
                    const ForwardOptions& options, std::vector<nd::Shape>* level_shapes) {
  const std::size_t n = layers.size();
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("U-Net requires an odd number (>= 3) of layers");
  for (std::size_t i = 0; i < n; ++i) {
    if (layers[i].hidden != layers[n - 1 - i].hidden) throw std::invalid_argument("U-Net hidden dimensions must be palindromic");
  }
  const std::size_t mid = n / 2;
  const auto& shape = input.frames.front().shape();
  const std::size_t h = shape[1], w = shape[2];
  const std::size_t factor = std::size_t{1} << mid;
  if (h % factor || w % factor) {
    throw std::invalid_argument("spatial size " + nd::shape_string(shape) + " is not divisible by " +
                                std::to_string(factor));
  }
  if (level_shapes) level_shapes->clear();

  std::vector<CellState> states(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lvl = layers[i].level;
    states[i] = zero_state({layers[i].hidden, h >> lvl, w >> lvl});
    if (level_shapes) level_shapes->push_back({layers[i].hidden, h >> lvl, w >> lvl});
  }

  const bool uses_maps = !input.dt_maps.empty();
  for (std::size_t t = 0; t < input.frames.size(); ++t) {
    std::vector<Tensor> maps;
    if (uses_maps) {
      maps.push_back(input.dt_maps[t]);
      for (std::size_t lvl = 1; lvl <= mid; ++lvl) maps.push_back(downsample_time_map(maps.back()));
    }
    Tensor x = input.frames[t];
    for (std::size_t i = 0; i < n; ++i) {
      const Layer& layer = layers[i];
      if (i > 0 && i <= mid) {
        x = nd::pool2(g, states[i - 1].h);
      } else if (i > mid) {
        auto up = nd::conv2d(g, nd::upsample2(g, states[i - 1].h), layer.up_kernel, layer.up_bias);
        auto skip = states[n - 1 - i].h;
        if (options.zero_skip) skip = Tensor::zeros(skip.shape());
        x = nd::concat(g, {up, skip});
      }
      const Tensor map = uses_maps ? maps[layer.level] : Tensor{};
      const double dt = input.dt_days.empty() ? 0.0 : input.dt_days[t];
      states[i] = step_layer(g, layer, x, dt, map, states[i], time_scale_days);
    }
  }
  return states.back().h;
}

Tensor Forecaster::final_hidden(Graph& g, const ForecastInput& input, const ForwardOptions& options) const {
  check_input(input);
  if (spec_.unet) return unet_forward(g, layers_, input, spec_.time_scale_days, options);

  const bool conv = is_convolutional(spec_.kind);
  const auto& shape = input.frames.front().shape();
  std::vector<CellState> states;
  for (const auto& layer : layers_) {
    states.push_back(conv ? zero_state({layer.hidden, shape[1], shape[2]})
                          : zero_state({layer.hidden, shape[1] * shape[2]}));
  }
  for (std::size_t t = 0; t < input.frames.size(); ++t) {
    Tensor x = conv ? input.frames[t] : frame_for_dense(g, input.frames[t]);
    const double dt = input.dt_days.empty() ? 0.0 : input.dt_days[t];
    const Tensor map = input.dt_maps.empty() ? Tensor{} : input.dt_maps[t];
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      states[i] = step_layer(g, layers_[i], x, dt, map, states[i], spec_.time_scale_days);
      x = states[i].h;
    }
  }
  return states.back().h;
}

Tensor Forecaster::head(Graph& g, const Tensor& hidden) const {
  if (is_convolutional(spec_.kind)) return nd::conv2d(g, hidden, head_w_, head_b_);
  return nd::affine(g, hidden, head_w_, head_b_);
}

Tensor Forecaster::forward(Graph& g, const ForecastInput& input, const ForwardOptions& options) const {
  auto out = head(g, final_hidden(g, input, options));
  const auto& shape = input.frames.front().shape();
  if (out.rank() == 3) return out;
  return nd::reshape(g, out, {1, shape[1], shape[2]});
}

}  // namespace gapcast::cells
