#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gapcast/cells/cells.hpp"

namespace gapcast::cells {

enum class CellKind { lstm, time_lstm, time_aware_lstm, conv_lstm, conv_time_lstm, conv_time_aware_lstm };

std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view name);
bool is_convolutional(CellKind kind);

/// Which elapsed-time convention a cell consumes.
enum class TimeConvention { none, following, preceding };
TimeConvention time_convention(CellKind kind);

struct ModelSpec {
  CellKind kind = CellKind::conv_time_lstm;
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t kernel_size = 3;
  bool unet = false;
  std::size_t window_length = 6;
  double weight_decay = 1e-4;
  double time_scale_days = kDefaultTimeScaleDays;
  std::size_t input_channels = 1;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

/// One forecast's worth of model input. Frames are [C, H, W]; dt_days holds
/// one scalar per step and dt_maps one [1, H, W] map per step, both already in
/// the convention reported by time_convention(kind). Time-blind kinds ignore both.
struct ForecastInput {
  std::vector<Tensor> frames;
  std::vector<double> dt_days;
  std::vector<Tensor> dt_maps;
};

struct ForwardOptions {
  // Ablation switch for the U-Net: feeds zeros in place of skip connections.
  bool zero_skip = false;
};

using LayerParams = std::variant<LstmParams, TimeLstmParams, TimeAwareLstmParams, ConvLstmParams, ConvTimeLstmParams,
                                 ConvTimeAwareLstmParams>;

struct Layer {
  std::size_t input_channels = 0;
  std::size_t hidden = 0;
  std::size_t level = 0;  // U-Net resolution level (spatial size / 2^level)
  LayerParams params;
  // U-Net expanding layers: 1x1 convolution mapping the upsampled lower layer
  // to the skip width before concatenation.
  Tensor up_kernel;
  Tensor up_bias;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
  bool nonpositive = false;  // projected after every optimizer step
};

/// Runs one step of any cell kind. dt_days/dt_map are ignored by cells that
/// do not use elapsed time.
CellState step_layer(Graph& g, const Layer& layer, const Tensor& x, double dt_days, const Tensor& dt_map,
                     const CellState& state, double time_scale_days);

/// Stacked recurrent layers plus output head producing one forecast frame.
class Forecaster {
 public:
  Forecaster(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Stable, ordered list of every trainable tensor.
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;

  /// Runs the layers over all steps and applies the head to the last hidden
  /// state. Returns a [1, H, W] frame in the input's (scaled) units.
  Tensor forward(Graph& g, const ForecastInput& input, const ForwardOptions& options = {}) const;

  /// Final hidden state of the last layer.
  Tensor final_hidden(Graph& g, const ForecastInput& input, const ForwardOptions& options = {}) const;

  /// 1x1 convolution (or per-pixel affine map for dense cells) to one channel.
  Tensor head(Graph& g, const Tensor& hidden) const;

  Tensor head_weight() const { return head_w_; }
  Tensor head_bias() const { return head_b_; }

 private:
  void check_input(const ForecastInput& input) const;

  ModelSpec spec_;
  std::vector<Layer> layers_;
  Tensor head_w_;
  Tensor head_b_;
};

/// U-Net composition over convolutional layers: contracting layers pool their
/// hidden output before the next layer; expanding layers upsample, project to
/// the skip width and concatenate the symmetric layer's output. Returns the
/// last layer's final hidden state. Per-level spatial sizes are recorded in
/// `level_shapes` when non-null.
Tensor unet_forward(Graph& g, const std::vector<Layer>& layers, const ForecastInput& input, double time_scale_days,
                    const ForwardOptions& options = {}, std::vector<nd::Shape>* level_shapes = nullptr);

/// Mean 2x2 reduction of a [1, H, W] time map, used for coarser U-Net levels.
Tensor downsample_time_map(const Tensor& map);

}  // namespace gapcast::cells
