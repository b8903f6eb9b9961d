// gapcast command-line driver: synthesize, preprocess, build-dataset, train,
// evaluate, derive, perturb.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gapcast/baselines/baselines.hpp"
#include "gapcast/dataset/dataset.hpp"
#include "gapcast/dataset/store.hpp"
#include "gapcast/dataset/synth.hpp"
#include "gapcast/eval/eval.hpp"
#include "gapcast/pipeline/io.hpp"
#include "gapcast/pipeline/preprocess.hpp"
#include "gapcast/train/checkpoint.hpp"
#include "gapcast/train/experiment.hpp"
#include "gapcast/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gapcast;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  fs::path manifests = "data";
  fs::path work = "work";
  fs::path out;
  std::string model = "conv_time_lstm";
  std::string hidden_dims = "8,8";
  bool unet = false;
  std::size_t kernel_size = 3;
  std::size_t epochs = 100;
  std::string weight_decay = "1e-4,1e-3,1e-2,1e-1,1";
  double learning_rate = 1e-3;
  double final_lr_fraction = 1.0;
  std::size_t batch_size = 8;
  std::string split_mode = "70/15/15";
  std::string split = "validation";
  std::string volcano = "all";
  std::string ar_method = "gradient";
  std::uint64_t seed = 0;
  std::size_t window = 0;
  bool no_fill_age = false;
  std::vector<std::string> checkpoints;
  std::size_t bins = 100;
  // synthesize
  std::size_t volcanoes = 3;
  std::size_t scenes = 60;
  std::size_t size = 96;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& s : split_list(text)) {
    try {
      out.push_back(std::stoul(s));
    } catch (const std::exception&) {
      throw UsageError("hidden dims must be comma-separated integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("hidden dims must not be empty");
  return out;
}

std::vector<double> parse_decays(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      throw UsageError("weight decay must be a comma-separated list of numbers, got '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("weight decay sweep must not be empty");
  return out;
}

dataset::Split parse_split(const std::string& s) {
  if (s == "train") return dataset::Split::train;
  if (s == "validation") return dataset::Split::validation;
  if (s == "test") return dataset::Split::test;
  throw UsageError("unknown split '" + s + "'");
}

// Options shared by every subcommand, bound to one RunConfig. Values from
// --config apply only where the matching flag was not given.
class Options {
 public:
  Options(CLI::App& sub, RunConfig& cfg) : sub_(sub) {
    sub.add_option("--config", config_path_, "JSON file with option defaults");
    bind("--seed", cfg.seed, "seed", "random seed");
    bind("--volcano", cfg.volcano, "volcano", "training filter: all or a volcano id");
    bind("--split-mode", cfg.split_mode, "split_mode", "70/15/15 or 85/15");
    bind("--epochs", cfg.epochs, "epochs", "training epochs");
    bind("--weight-decay", cfg.weight_decay, "weight_decay", "comma-separated sweep");
    bind("--model", cfg.model, "model", "cell kind, ar, last_scene or all_zeros");
    bind("--hidden-dims", cfg.hidden_dims, "hidden_dims", "comma-separated layer widths");
    bind("--window", cfg.window, "window", "window length (0 = autocorrelation choice)");
    bind_path("--work", cfg.work, "work", "working directory");
    bind_path("--out", cfg.out, "out", "output path");
    bind("--learning-rate", cfg.learning_rate, "learning_rate", "Adam step size");
    bind("--final-lr-fraction", cfg.final_lr_fraction, "final_lr_fraction",
         "cosine-decay the step size to this fraction of --learning-rate (1 = constant)");
    bind("--batch-size", cfg.batch_size, "batch_size", "mini-batch size");
    bind("--kernel-size", cfg.kernel_size, "kernel_size", "convolution kernel size");
    bind("--split", cfg.split, "split", "split to score: train, validation or test");
    bind("--ar-method", cfg.ar_method, "ar_method", "gradient or closed_form");
    bind_flag("--unet", cfg.unet, "unet", "U-Net composition of the layers");
    bind_flag("--no-fill-age", cfg.no_fill_age, "no_fill_age", "time maps use plain scene gaps");
  }

  template <class T>
  void bind(const std::string& flag, T& field, const std::string& key, const std::string& help) {
    auto* opt = sub_.add_option(flag, field, help);
    appliers_.push_back([opt, &field, key](const json& j) {
      if (opt->count() == 0 && j.contains(key)) field = j.at(key).get<T>();
    });
  }

  void bind_path(const std::string& flag, fs::path& field, const std::string& key, const std::string& help) {
    auto* opt = sub_.add_option(flag, field, help);
    appliers_.push_back([opt, &field, key](const json& j) {
      if (opt->count() == 0 && j.contains(key)) field = j.at(key).get<std::string>();
    });
  }

  void bind_flag(const std::string& flag, bool& field, const std::string& key, const std::string& help) {
    auto* opt = sub_.add_flag(flag, field, help);
    appliers_.push_back([opt, &field, key](const json& j) {
      if (opt->count() == 0 && j.contains(key)) field = j.at(key).get<bool>();
    });
  }

  void apply_config() const {
    if (config_path_.empty()) return;
    json j;
    try {
      j = json::parse(io::read_text(config_path_));
    } catch (const json::exception& e) {
      throw io::DataError("config " + config_path_ + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw io::DataError("config " + config_path_ + " must be a JSON object");
    // Numbers given as strings in lists are accepted for the sweep and dims.
    for (const char* key : {"weight_decay", "hidden_dims"}) {
      if (j.contains(key) && j[key].is_array()) {
        std::string joined;
        for (const auto& v : j[key]) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
        j[key] = joined;
      } else if (j.contains(key) && j[key].is_number()) {
        j[key] = j[key].dump();
      }
    }
    try {
      for (const auto& a : appliers_) a(j);
    } catch (const json::exception& e) {
      throw UsageError("config " + config_path_ + ": " + e.what());
    }
  }

 private:
  CLI::App& sub_;
  std::string config_path_;
  std::vector<std::function<void(const json&)>> appliers_;
};

fs::path processed_dir(const RunConfig& c) { return c.work / "processed"; }
fs::path dataset_dir(const RunConfig& c) { return c.work / "dataset"; }

std::vector<pipeline::ProcessedVolcano> load_processed(const RunConfig& c) {
  const auto dir = processed_dir(c);
  if (!fs::is_directory(dir)) throw io::DataError("no processed scenes in " + dir.string() + "; run preprocess first");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".bin") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<pipeline::ProcessedVolcano> out;
  for (const auto& f : files) out.push_back(pipeline::read_processed(f));
  if (out.empty()) throw io::DataError("no processed scenes in " + dir.string());
  return out;
}

train::PrepareOptions protocol(const std::string& split_mode, std::size_t window, bool fill_age) {
  train::PrepareOptions p;
  p.split = dataset::parse_split_mode(split_mode);
  p.window_length = window;
  p.sequences.fill_age_in_maps = fill_age;
  return p;
}

json scaler_json(const pipeline::ScalerParams& s) { return {{"x_min", s.x_min}, {"x_max", s.x_max}}; }

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// ---------------------------------------------------------------- synthesize

int cmd_synthesize(const RunConfig& c) {
  const fs::path out = c.out.empty() ? c.manifests : c.out;
  dataset::SynthConfig cfg;
  cfg.seed = c.seed;
  cfg.n_volcanoes = c.volcanoes;
  cfg.n_scenes = c.scenes;
  cfg.height = cfg.width = c.size;
  const auto corpus = dataset::synthesize_corpus(cfg);
  dataset::write_corpus(out, corpus);
  std::cout << "wrote " << corpus.size() << " synthetic volcanoes x " << c.scenes << " scenes to " << out.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- preprocess

int cmd_preprocess(const RunConfig& c) {
  const auto manifests = io::list_manifests(c.manifests);
  if (manifests.empty()) throw io::DataError("no manifests in " + c.manifests.string());
  fs::create_directories(processed_dir(c));
  fs::create_directories(c.work / "reports");
  std::vector<pipeline::ProcessedVolcano> all;
  json summary = json::array();
  for (const auto& [path, manifest] : manifests) {
    auto v = pipeline::preprocess_manifest(path);
    std::size_t dropped = 0;
    for (const auto& s : v.report.scenes) {
      if (!s.usable) {
        ++dropped;
        std::cerr << "excluded " << v.volcano_id << " " << s.file << ": " << s.reason << "\n";
      }
    }
    pipeline::write_processed(processed_dir(c) / (v.volcano_id + ".bin"), v);
    io::write_text(c.work / "reports" / (v.volcano_id + ".json"), pipeline::report_json(v.report).dump(2) + "\n");
    summary.push_back({{"volcano_id", v.volcano_id}, {"scenes", v.scenes.size()}, {"excluded", dropped}});
    std::cout << v.volcano_id << ": " << v.scenes.size() << " usable scenes, " << dropped << " excluded\n";
    all.push_back(std::move(v));
  }
  const auto split = dataset::parse_split_mode(c.split_mode);
  std::vector<dataset::VolcanoScenes> vs;
  for (const auto& v : all) vs.push_back({v.volcano_id, v.scenes});
  const auto scaler = pipeline::fit_scaler(train::training_grids(vs, split));
  io::write_text(c.work / "scaler.json", json{{"split_mode", c.split_mode}, {"scaler", scaler_json(scaler)}}.dump(2) + "\n");
  io::write_text(c.work / "reports" / "summary.json", summary.dump(2) + "\n");
  return kOk;
}

// ------------------------------------------------------------- build-dataset

int cmd_build_dataset(const RunConfig& c) {
  const auto processed = load_processed(c);
  auto prep = train::prepare_data(processed, protocol(c.split_mode, c.window, !c.no_fill_age));
  warn_all(prep.warnings);
  const auto dir = dataset_dir(c);
  fs::create_directories(dir);
  for (auto s : {dataset::Split::train, dataset::Split::validation, dataset::Split::test}) {
    dataset::write_sequences(dir / (std::string(dataset::to_string(s)) + ".bin"), prep.data[s]);
  }
  const auto spec = dataset::parse_split_mode(c.split_mode);
  json volcanoes = json::object();
  for (const auto& v : prep.volcanoes) {
    const auto split = dataset::chronological_split(v.scenes, spec);
    json entry = json::object();
    for (auto s : {dataset::Split::train, dataset::Split::validation, dataset::Split::test}) {
      json dates = json::array();
      for (const auto& sc : split[s]) dates.push_back(format_date(sc.date));
      entry[std::string(dataset::to_string(s))] = dates;
    }
    volcanoes[v.volcano_id] = entry;
  }
  const json sidecar = {{"window_length", prep.data.window_length},
                        {"split_mode", c.split_mode},
                        {"fill_age_in_maps", !c.no_fill_age},
                        {"scaler", scaler_json(prep.scaler)},
                        {"sequences",
                         {{"train", prep.data.train.size()},
                          {"validation", prep.data.validation.size()},
                          {"test", prep.data.test.size()}}},
                        {"volcanoes", volcanoes},
                        {"warnings", prep.warnings}};
  io::write_text(dir / "splits.json", sidecar.dump(2) + "\n");
  std::cout << "window length " << prep.data.window_length << "; sequences train " << prep.data.train.size()
            << ", validation " << prep.data.validation.size() << ", test " << prep.data.test.size() << "\n";
  return kOk;
}

// --------------------------------------------------------------------- train

struct DatasetProtocol {
  std::size_t window = 0;
  std::string split_mode;
  bool fill_age = true;
};

DatasetProtocol read_protocol(const RunConfig& c) {
  const auto path = dataset_dir(c) / "splits.json";
  if (!fs::exists(path)) throw io::DataError("no dataset in " + dataset_dir(c).string() + "; run build-dataset first");
  try {
    const auto j = json::parse(io::read_text(path));
    return {j.at("window_length").get<std::size_t>(), j.at("split_mode").get<std::string>(),
            j.at("fill_age_in_maps").get<bool>()};
  } catch (const json::exception& e) {
    throw io::DataError(path.string() + ": " + e.what());
  }
}

// Dataset for training under the given filter. The full dataset is read from
// build-dataset output; a single-volcano filter picks that volcano's own
// window length and rebuilds the sequences.
train::PreparedData training_data(const RunConfig& c, const DatasetProtocol& p) {
  const auto processed = load_processed(c);
  std::size_t window = c.window ? c.window : p.window;
  if (c.volcano != "all" && c.window == 0) {
    const auto it = std::find_if(processed.begin(), processed.end(), [&](const auto& v) { return v.volcano_id == c.volcano; });
    if (it == processed.end()) throw UsageError("unknown volcano '" + c.volcano + "'");
    const auto train = dataset::chronological_split(it->scenes, dataset::parse_split_mode(p.split_mode)).train;
    if (train.size() >= dataset::kMinAcfPoints) window = dataset::select_window_length(dataset::max_temperature_series(train));
  }
  train::PreparedData prep;
  if (window == p.window && c.volcano == "all") {
    prep = train::prepare_data(processed, protocol(p.split_mode, window, p.fill_age));
    for (auto s : {dataset::Split::train, dataset::Split::validation, dataset::Split::test}) {
      const auto stored = dataset::read_sequences(dataset_dir(c) / (std::string(dataset::to_string(s)) + ".bin"));
      if (stored != prep.data[s]) throw io::DataError("stored " + std::string(dataset::to_string(s)) + " sequences are stale; rerun build-dataset");
    }
  } else {
    prep = train::prepare_data(processed, protocol(p.split_mode, window, p.fill_age));
  }
  if (c.volcano != "all") {
    try {
      prep.data = dataset::filter_volcano(prep.data, c.volcano);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return prep;
}

struct SweepRow {
  std::string weight_decay;
  std::string status;
  double final_loss = std::nan("");
  double validation_rmse = std::nan("");
  std::uint64_t steps = 0;
};

int cmd_train(const RunConfig& c) {
  const fs::path out = c.out.empty() ? c.work / "runs" / (c.model + "_" + c.volcano) : c.out;
  fs::create_directories(out);
  const auto p = read_protocol(c);
  auto prep = training_data(c, p);
  warn_all(prep.warnings);
  dataset::SequenceStore store(prep.data);
  const std::size_t n = prep.data.window_length;

  train::Checkpoint base;
  base.scaler = prep.scaler;
  base.training_filter = c.volcano;
  base.split_mode = p.split_mode;
  base.fill_age_in_maps = p.fill_age;
  base.seed = c.seed;
  base.spec.window_length = n;

  std::vector<SweepRow> rows;
  std::vector<train::Checkpoint> ckpts;
  std::string curves = "weight_decay,epoch,train_mse\n";

  const bool is_baseline = c.model == "last_scene" || c.model == "all_zeros";
  if (is_baseline) {
    auto ck = base;
    ck.type = train::parse_model_type(c.model);
    const auto score = train::score_split(store, dataset::Split::validation, train::checkpoint_forecaster(ck));
    rows.push_back({"none", "ok", std::nan(""), score.pooled, 0});
    ckpts.push_back(ck);
  } else if (c.model == "ar") {
    const auto windows = train::training_windows(store);
    if (c.ar_method == "closed_form") {
      auto ck = base;
      ck.type = train::ModelType::ar;
      SweepRow row{"none", "ok", std::nan(""), std::nan(""), 0};
      try {
        ck.ar = baselines::ar_fit_closed_form(windows, n);
        row.final_loss = baselines::ar_training_mse(ck.ar, windows);
        row.validation_rmse = train::score_split(store, dataset::Split::validation, train::checkpoint_forecaster(ck)).pooled;
      } catch (const baselines::SingularSystemError& e) {
        row.status = std::string("failed: ") + e.what();
      }
      rows.push_back(row);
      ckpts.push_back(ck);
    } else if (c.ar_method == "gradient") {
      for (double wd : parse_decays(c.weight_decay)) {
        auto ck = base;
        ck.type = train::ModelType::ar;
        SweepRow row{num(wd), "ok", std::nan(""), std::nan(""), 0};
        try {
          ck.ar = baselines::ar_fit_gradient(windows, n,
                                             {.epochs = c.epochs, .batch_size = c.batch_size, .learning_rate = c.learning_rate,
                                              .weight_decay = wd, .seed = c.seed});
          row.final_loss = baselines::ar_training_mse(ck.ar, windows);
          row.validation_rmse = train::score_split(store, dataset::Split::validation, train::checkpoint_forecaster(ck)).pooled;
        } catch (const std::runtime_error& e) {
          row.status = std::string("diverged: ") + e.what();
        }
        rows.push_back(row);
        ckpts.push_back(ck);
      }
    } else {
      throw UsageError("unknown AR method '" + c.ar_method + "'");
    }
  } else {
    cells::ModelSpec spec;
    try {
      spec.kind = cells::parse_cell_kind(c.model);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    spec.hidden_dims = parse_dims(c.hidden_dims);
    spec.kernel_size = c.kernel_size;
    spec.unet = c.unet;
    spec.window_length = n;
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    for (double wd : parse_decays(c.weight_decay)) {
      auto ck = base;
      ck.type = train::ModelType::neural;
      ck.spec = spec;
      ck.spec.weight_decay = wd;
      ck.model.emplace(ck.spec, c.seed);
      std::cout << c.model << " weight_decay " << num(wd) << " (" << ck.model->parameter_count() << " parameters)\n"
                << std::flush;
      const auto r = train::train_model(
          *ck.model, store, prep.scaler,
          {.epochs = c.epochs, .batch_size = c.batch_size, .learning_rate = c.learning_rate, .weight_decay = wd,
           .final_lr_fraction = c.final_lr_fraction,
           .seed = c.seed, .on_epoch = [&](std::size_t e, double loss) {
             curves += num(wd) + "," + std::to_string(e) + "," + num(loss) + "\n";
             if (e == 1 || e % 10 == 0 || e == c.epochs) std::cout << "  epoch " << e << " train_mse " << num(loss) << "\n" << std::flush;
           }});
      SweepRow row{num(wd), r.diverged ? "diverged: " + r.failure : "ok",
                   r.epoch_loss.empty() ? std::nan("") : r.epoch_loss.back(), r.validation_rmse, r.steps};
      rows.push_back(row);
      ckpts.push_back(std::move(ck));
    }
  }

  std::optional<std::size_t> best;
  std::string table = "weight_decay,status,final_train_mse,validation_rmse,steps\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    table += r.weight_decay + "," + r.status + "," + num(r.final_loss) + "," + num(r.validation_rmse) + "," +
             std::to_string(r.steps) + "\n";
    const bool usable = r.status == "ok" && std::isfinite(r.validation_rmse);
    if (usable && (!best || r.validation_rmse < rows[*best].validation_rmse)) best = i;
    if (r.status == "ok") train::save_checkpoint(out / ("checkpoint_" + std::to_string(i) + ".ckpt"), ckpts[i]);
  }
  io::write_text(out / "sweep.csv", table);
  if (!is_baseline) io::write_text(out / "loss_curves.csv", curves);
  std::cout << table;
  if (!best) {
    // Either every run diverged or there is no validation data to choose by.
    const bool all_failed = std::none_of(rows.begin(), rows.end(), [](const auto& r) { return r.status == "ok"; });
    if (all_failed) throw NumericalError("every sweep run failed");
    best = 0;
    std::cerr << "warning: no validation sequences; keeping the first sweep entry\n";
  }
  train::save_checkpoint(out / "best.ckpt", ckpts[*best]);
  const json metrics = {{"model", c.model},
                        {"training_filter", c.volcano},
                        {"window_length", n},
                        {"best_weight_decay", rows[*best].weight_decay},
                        {"validation_rmse", std::isfinite(rows[*best].validation_rmse) ? json(rows[*best].validation_rmse) : json()},
                        {"train_sequences", store.size(dataset::Split::train)},
                        {"validation_sequences", store.size(dataset::Split::validation)},
                        {"gradient_phase_reads",
                         {{"train", store.pixel_reads(dataset::Split::train, dataset::Phase::gradient)},
                          {"validation", store.pixel_reads(dataset::Split::validation, dataset::Phase::gradient)},
                          {"test", store.pixel_reads(dataset::Split::test, dataset::Phase::gradient)}}}};
  io::write_text(out / "metrics.json", metrics.dump(2) + "\n");
  std::cout << "best weight decay " << rows[*best].weight_decay << ", validation RMSE " << num(rows[*best].validation_rmse)
            << "; checkpoint " << (out / "best.ckpt").string() << "\n";
  return kOk;
}

// -------------------------------------------------- evaluate/derive/perturb

train::PreparedData evaluation_data(const RunConfig& c, const train::Checkpoint& ck) {
  const auto processed = load_processed(c);
  auto prep = train::prepare_data(processed, protocol(ck.split_mode, ck.spec.window_length, ck.fill_age_in_maps));
  warn_all(prep.warnings);
  return prep;
}

std::string model_label(const train::Checkpoint& ck) {
  if (ck.type != train::ModelType::neural) {
    return ck.type == train::ModelType::ar ? "AR(" + std::to_string(ck.ar.order()) + ")" : std::string(train::to_string(ck.type));
  }
  std::string dims;
  for (auto d : ck.spec.hidden_dims) dims += (dims.empty() ? "" : "-") + std::to_string(d);
  return std::string(cells::to_string(ck.spec.kind)) + (ck.spec.unet ? "+unet" : "") + " {" + dims + "}";
}

int cmd_evaluate(const RunConfig& c) {
  if (c.checkpoints.empty()) throw UsageError("evaluate needs at least one --checkpoint");
  const auto split = parse_split(c.split);
  const auto processed = load_processed(c);
  std::vector<std::string> ids;
  for (const auto& v : processed) ids.push_back(v.volcano_id);

  std::string table = "training_filter,model";
  for (const auto& id : ids) table += "," + id;
  table += ",pooled\n";
  json summary = json::array();
  for (const auto& path : c.checkpoints) {
    const auto ck = train::load_checkpoint(path);
    auto prep = evaluation_data(c, ck);
    dataset::SequenceStore store(prep.data);
    const auto score = train::score_split(store, split, train::checkpoint_forecaster(ck));
    std::map<std::string, double> per(score.per_volcano.begin(), score.per_volcano.end());
    table += ck.training_filter + "," + model_label(ck);
    json entry = {{"checkpoint", fs::path(path).filename().string()},
                  {"model", model_label(ck)},
                  {"training_filter", ck.training_filter},
                  {"split", c.split},
                  {"sequences", score.sequences}};
    for (const auto& id : ids) {
      const auto it = per.find(id);
      table += "," + (it == per.end() ? std::string("") : num(it->second));
      if (it != per.end()) entry["per_volcano"][id] = it->second;
    }
    table += "," + num(score.pooled) + "\n";
    entry["pooled"] = std::isfinite(score.pooled) ? json(score.pooled) : json();
    summary.push_back(entry);
  }
  const fs::path out = c.out.empty() ? c.work / ("evaluate_" + c.split + ".csv") : c.out;
  io::write_text(out, table);
  io::write_text(fs::path(out).replace_extension(".json"), summary.dump(2) + "\n");
  std::cout << table;
  return kOk;
}

int cmd_derive(const RunConfig& c) {
  if (c.checkpoints.size() != 1) throw UsageError("derive needs exactly one --checkpoint");
  const auto split = parse_split(c.split);
  const auto ck = train::load_checkpoint(c.checkpoints.front());
  auto prep = evaluation_data(c, ck);
  dataset::SequenceStore store(prep.data);
  const auto forecast = train::checkpoint_forecaster(ck);
  const fs::path out = c.out.empty() ? c.work / ("derive_" + c.split) : c.out;
  fs::create_directories(out);

  std::vector<double> reference;
  for (const auto& g : train::training_grids(prep.volcanoes, dataset::parse_split_mode(ck.split_mode)))
    reference.insert(reference.end(), g.values.begin(), g.values.end());

  struct Triple {
    eval::DerivedPoint observed, raw, matched;
  };
  std::map<std::string, std::vector<Triple>> by_volcano;
  std::vector<double> pop_observed, pop_raw, pop_matched;
  for (std::size_t i = 0; i < store.size(split); ++i) {
    const auto& seq = store.fetch(split, i, dataset::Phase::evaluation);
    const Grid pred = forecast(seq);
    const Grid matched = eval::histogram_match(pred, reference);
    by_volcano[seq.volcano_id].push_back({eval::derive_point(seq.target.grid, seq.target.date),
                                          eval::derive_point(pred, seq.target.date),
                                          eval::derive_point(matched, seq.target.date)});
    pop_observed.insert(pop_observed.end(), seq.target.grid.values.begin(), seq.target.grid.values.end());
    pop_raw.insert(pop_raw.end(), pred.values.begin(), pred.values.end());
    pop_matched.insert(pop_matched.end(), matched.values.begin(), matched.values.end());
  }
  if (by_volcano.empty()) throw io::DataError("no " + c.split + " sequences to derive from");

  using Getter = double (*)(const eval::DerivedPoint&);
  const std::vector<std::pair<std::string, Getter>> metrics = {
      {"max_excess_temp", [](const eval::DerivedPoint& p) { return p.max_excess_temp; }},
      {"hotspot_count", [](const eval::DerivedPoint& p) { return static_cast<double>(p.hotspot_count); }},
      {"max_hotspot_distance", [](const eval::DerivedPoint& p) { return p.max_hotspot_distance; }}};
  json summary = {{"model", model_label(ck)}, {"split", c.split}};
  for (const auto& [name, get] : metrics) {
    double se_raw = 0.0, se_matched = 0.0;
    std::size_t count = 0;
    for (const auto& [id, points] : by_volcano) {
      std::string csv = "date,observed,forecast,forecast_histogram_matched\n";
      for (const auto& t : points) {
        csv += format_date(t.observed.date) + "," + num(get(t.observed)) + "," + num(get(t.raw)) + "," + num(get(t.matched)) + "\n";
        se_raw += std::pow(get(t.raw) - get(t.observed), 2);
        se_matched += std::pow(get(t.matched) - get(t.observed), 2);
        ++count;
      }
      io::write_text(out / (id + "_" + name + ".csv"), csv);
    }
    summary["rmse"][name] = {{"forecast", std::sqrt(se_raw / count)}, {"forecast_histogram_matched", std::sqrt(se_matched / count)}};
  }
  std::string hist = "series,bin_edge,cumulative_count\n";
  for (const auto& [label, pop] : std::vector<std::pair<std::string, const std::vector<double>*>>{
           {"observed", &pop_observed}, {"forecast", &pop_raw}, {"forecast_histogram_matched", &pop_matched}}) {
    const auto h = eval::cumulative_histogram(*pop, c.bins);
    for (std::size_t b = 0; b < h.upper_edges.size(); ++b) hist += label + "," + num(h.upper_edges[b]) + "," + std::to_string(h.cumulative[b]) + "\n";
    summary["maximum"][label] = h.max;
  }
  io::write_text(out / "cumulative_histogram.csv", hist);
  io::write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_perturb(const RunConfig& c) {
  if (c.checkpoints.size() != 1) throw UsageError("perturb needs exactly one --checkpoint");
  const auto split = parse_split(c.split);
  const auto ck = train::load_checkpoint(c.checkpoints.front());
  if (ck.type != train::ModelType::neural) {
    throw UsageError("time perturbation needs a neural checkpoint; " + std::string(train::to_string(ck.type)) + " ignores elapsed time");
  }
  auto prep = evaluation_data(c, ck);
  dataset::SequenceStore store(prep.data);
  std::vector<dataset::SceneSequence> seqs;
  for (std::size_t i = 0; i < store.size(split); ++i) seqs.push_back(store.fetch(split, i, dataset::Phase::evaluation));
  std::vector<eval::PerturbationResult> rows;
  try {
    rows = eval::perturb_time_experiment(*ck.model, seqs, ck.scaler);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::string table = "adjustment,mean_diff,rmse_vs_original\n";
  for (const auto& r : rows) table += r.label + "," + num(r.mean_diff) + "," + num(r.rmse_vs_original) + "\n";
  const fs::path out = c.out.empty() ? c.work / ("perturb_" + c.split + ".csv") : c.out;
  io::write_text(out, table);
  std::cout << table;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecasting irregularly spaced thermal image sequences"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::vector<std::pair<CLI::App*, std::unique_ptr<Options>>> options;
  auto add = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    options.emplace_back(sub, std::make_unique<Options>(*sub, cfg));
    return std::pair{sub, options.back().second.get()};
  };

  auto [synth, synth_opts] = add("synthesize", "write a seeded synthetic corpus");
  synth_opts->bind("--volcanoes", cfg.volcanoes, "volcanoes", "number of volcanoes");
  synth_opts->bind("--scenes", cfg.scenes, "scenes", "scenes per volcano");
  synth_opts->bind("--size", cfg.size, "size", "scene height and width in pixels");
  auto [pre, pre_opts] = add("preprocess", "fill, background-subtract and store scenes");
  pre_opts->bind_path("--manifests", cfg.manifests, "manifests", "directory of volcano manifests");
  auto [build, build_opts] = add("build-dataset", "split scenes and build sequences");
  auto [trn, trn_opts] = add("train", "fit a model at every weight decay in the sweep");
  auto [evl, evl_opts] = add("evaluate", "RMSE per volcano for one or more checkpoints");
  auto [drv, drv_opts] = add("derive", "derived time series with and without histogram matching");
  auto [prt, prt_opts] = add("perturb", "elapsed-time perturbation experiment");
  for (auto* sub : {evl, drv, prt}) sub->add_option("--checkpoint", cfg.checkpoints, "checkpoint file")->required();
  drv_opts->bind("--bins", cfg.bins, "bins", "cumulative histogram bins");
  (void)build_opts;
  (void)trn_opts;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    for (const auto& [s, o] : options) {
      if (s == sub) o->apply_config();
    }
    if (sub == synth) return cmd_synthesize(cfg);
    if (sub == pre) return cmd_preprocess(cfg);
    if (sub == build) return cmd_build_dataset(cfg);
    if (sub == trn) return cmd_train(cfg);
    if (sub == evl) return cmd_evaluate(cfg);
    if (sub == drv) return cmd_derive(cfg);
    if (sub == prt) return cmd_perturb(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const train::CheckpointMismatch& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kData;
  } catch (const pipeline::UnusableSceneError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const baselines::SingularSystemError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
