#include "gapcast/train/checkpoint.hpp"

#include "gapcast/core/container.hpp"
#include "gapcast/eval/eval.hpp"
#include "gapcast/pipeline/io.hpp"

namespace gapcast::train {

using nlohmann::json;

std::string_view to_string(ModelType t) {
  switch (t) {
    case ModelType::neural: return "neural";
    case ModelType::ar: return "ar";
    case ModelType::last_scene: return "last_scene";
    case ModelType::all_zeros: return "all_zeros";
  }
  return "unknown";
}

ModelType parse_model_type(std::string_view name) {
  for (auto t : {ModelType::neural, ModelType::ar, ModelType::last_scene, ModelType::all_zeros}) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown model type '" + std::string(name) + "'");
}

json spec_to_json(const cells::ModelSpec& s) {
  return {{"kind", cells::to_string(s.kind)},
          {"hidden_dims", s.hidden_dims},
          {"kernel_size", s.kernel_size},
          {"unet", s.unet},
          {"window_length", s.window_length},
          {"weight_decay", s.weight_decay},
          {"time_scale_days", s.time_scale_days},
          {"input_channels", s.input_channels}};
}

cells::ModelSpec spec_from_json(const json& j) {
  cells::ModelSpec s;
  s.kind = cells::parse_cell_kind(j.at("kind").get<std::string>());
  s.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
  s.kernel_size = j.at("kernel_size").get<std::size_t>();
  s.unet = j.at("unet").get<bool>();
  s.window_length = j.at("window_length").get<std::size_t>();
  s.weight_decay = j.at("weight_decay").get<double>();
  s.time_scale_days = j.at("time_scale_days").get<double>();
  s.input_channels = j.at("input_channels").get<std::size_t>();
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json params = json::array();
  std::vector<double> payload;
  if (ckpt.type == ModelType::neural) {
    if (!ckpt.model) throw std::invalid_argument("neural checkpoint without a model");
    for (const auto& p : ckpt.model->parameters()) {
      params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", payload.size()}});
      payload.insert(payload.end(), p.tensor.data().begin(), p.tensor.data().end());
    }
  } else if (ckpt.type == ModelType::ar) {
    params.push_back({{"name", "ar.phi"}, {"shape", {ckpt.ar.order()}}, {"offset", 0}});
    payload = ckpt.ar.phi;
  }
  json header = {{"format", "gapcast-checkpoint"},
                 {"version", 1},
                 {"model_type", to_string(ckpt.type)},
                 {"spec", spec_to_json(ckpt.spec)},
                 {"parameters", params},
                 {"scaler", {{"x_min", ckpt.scaler.x_min}, {"x_max", ckpt.scaler.x_max}}},
                 {"training_filter", ckpt.training_filter},
                 {"split_mode", ckpt.split_mode},
                 {"fill_age_in_maps", ckpt.fill_age_in_maps},
                 {"seed", ckpt.seed}};
  io::write_container(path, header, payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto c = io::read_container(path);
  const auto& h = c.header;
  if (h.value("format", std::string()) != "gapcast-checkpoint") {
    throw io::DataError(path.string() + " is not a checkpoint");
  }
  Checkpoint ckpt;
  try {
    ckpt.type = parse_model_type(h.at("model_type").get<std::string>());
    ckpt.spec = spec_from_json(h.at("spec"));
    ckpt.scaler = {h.at("scaler").at("x_min").get<double>(), h.at("scaler").at("x_max").get<double>()};
    ckpt.training_filter = h.at("training_filter").get<std::string>();
    ckpt.split_mode = h.at("split_mode").get<std::string>();
    ckpt.fill_age_in_maps = h.at("fill_age_in_maps").get<bool>();
    ckpt.seed = h.at("seed").get<std::uint64_t>();
    const auto& params = h.at("parameters");
    if (ckpt.type == ModelType::neural) {
      ckpt.model.emplace(ckpt.spec, 0);
      const auto expected = ckpt.model->parameters();
      if (params.size() != expected.size()) {
        throw CheckpointMismatch(path.string() + ": spec implies " + std::to_string(expected.size()) +
                                 " parameter tensors, file has " + std::to_string(params.size()));
      }
      for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& e = params[i];
        auto t = expected[i].tensor;
        const auto name = e.at("name").get<std::string>();
        const auto shape = e.at("shape").get<nd::Shape>();
        const auto offset = e.at("offset").get<std::size_t>();
        if (name != expected[i].name || shape != t.shape()) {
          throw CheckpointMismatch(path.string() + ": parameter " + name + " " + nd::shape_string(shape) +
                                   " does not match " + expected[i].name + " " + nd::shape_string(t.shape()));
        }
        if (offset + t.size() > c.payload.size()) throw CheckpointMismatch(path.string() + ": payload truncated");
        std::copy_n(c.payload.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data().begin());
      }
    } else if (ckpt.type == ModelType::ar) {
      ckpt.ar.phi = c.payload;
      if (params.size() != 1 || params[0].at("shape").at(0).get<std::size_t>() != c.payload.size()) {
        throw CheckpointMismatch(path.string() + ": AR coefficient count does not match header");
      }
    }
  } catch (const json::exception& e) {
    throw io::DataError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  return ckpt;
}

ForecastFn checkpoint_forecaster(const Checkpoint& ckpt) {
  auto grids = [](const dataset::SceneSequence& s) {
    std::vector<Grid> out;
    for (const auto& in : s.inputs) out.push_back(in.grid);
    return out;
  };
  switch (ckpt.type) {
    case ModelType::neural: {
      if (!ckpt.model) throw std::invalid_argument("neural checkpoint without a model");
      const auto& model = *ckpt.model;
      const auto scaler = ckpt.scaler;
      return [&model, scaler](const dataset::SceneSequence& s) {
        return eval::forecast_celsius(model, dataset::to_forecast_input(s, model.spec().kind, scaler), scaler);
      };
    }
    case ModelType::ar: {
      const auto ar = ckpt.ar;
      return [ar, grids](const dataset::SceneSequence& s) { return baselines::ar_forecast(ar, grids(s)); };
    }
    case ModelType::last_scene:
      return [grids](const dataset::SceneSequence& s) { return baselines::last_scene_forecast(grids(s)); };
    case ModelType::all_zeros:
      return [](const dataset::SceneSequence& s) {
        return baselines::all_zeros_forecast(s.target.grid.height, s.target.grid.width);
      };
  }
  throw std::logic_error("unhandled model type");
}

}  // namespace gapcast::train
