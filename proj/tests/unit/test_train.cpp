#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gapcast/baselines/baselines.hpp"
#include "gapcast/dataset/synth.hpp"
#include "gapcast/train/checkpoint.hpp"
#include "gapcast/train/experiment.hpp"
#include "gapcast/train/trainer.hpp"

namespace gapcast::train {
namespace {

namespace fs = std::filesystem;

PreparedData small_corpus(std::size_t scenes = 24, std::size_t side = 12) {
  const dataset::SynthConfig cfg{.seed = 21, .n_volcanoes = 2, .n_scenes = scenes, .height = side, .width = side};
  std::vector<pipeline::ProcessedVolcano> processed;
  for (const auto& v : dataset::synthesize_corpus(cfg)) processed.push_back(pipeline::preprocess_volcano(v.manifest, v.rasters));
  return prepare_data(processed, {.window_length = 3});
}

cells::ModelSpec small_spec(cells::CellKind kind, std::size_t hidden = 4) {
  cells::ModelSpec spec;
  spec.kind = kind;
  spec.hidden_dims = {hidden};
  spec.window_length = 3;
  return spec;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Experiment, ScalerUsesTrainingScenesOnly) {
  const auto prep = small_corpus();
  double lo = 1e300, hi = -1e300;
  for (const auto& v : prep.volcanoes)
    for (std::size_t i = 0; i < 16; ++i)  // floor(0.7 * 24)
      for (double x : v.scenes[i].grid.values) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
  EXPECT_EQ(prep.scaler.x_min, lo);
  EXPECT_EQ(prep.scaler.x_max, hi);
  EXPECT_EQ(prep.data.window_length, 3u);
  EXPECT_EQ(prep.data.train.size(), 2u * 13u);
}

TEST(Experiment, AutomaticWindowIsClamped) {
  const dataset::SynthConfig cfg{.seed = 22, .n_volcanoes = 2, .n_scenes = 40, .height = 12, .width = 12};
  std::vector<pipeline::ProcessedVolcano> processed;
  for (const auto& v : dataset::synthesize_corpus(cfg)) processed.push_back(pipeline::preprocess_volcano(v.manifest, v.rasters));
  const auto prep = prepare_data(processed, {});
  EXPECT_GE(prep.data.window_length, dataset::kMinWindow);
  EXPECT_LE(prep.data.window_length, dataset::kMaxWindow);
}

TEST(Checkpoint, NeuralRoundTripIsExact) {
  auto spec = small_spec(cells::CellKind::conv_time_aware_lstm);
  spec.hidden_dims = {2, 4, 2};
  spec.unet = true;
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.model.emplace(spec, 99);
  ckpt.scaler = {-1.5, 80.25};
  ckpt.training_filter = "synth_02";
  ckpt.split_mode = "85/15";
  ckpt.fill_age_in_maps = false;
  ckpt.seed = 1234;
  const auto path = fs::temp_directory_path() / "gapcast_test_ckpt.bin";
  save_checkpoint(path, ckpt);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.spec, spec);
  EXPECT_EQ(back.scaler, ckpt.scaler);
  EXPECT_EQ(back.training_filter, "synth_02");
  EXPECT_EQ(back.split_mode, "85/15");
  EXPECT_FALSE(back.fill_age_in_maps);
  EXPECT_EQ(back.seed, 1234u);
  const auto a = ckpt.model->parameters(), b = back.model->parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
  }
  // Saving what was loaded reproduces the file byte for byte.
  const auto again = fs::temp_directory_path() / "gapcast_test_ckpt2.bin";
  save_checkpoint(again, back);
  EXPECT_EQ(file_bytes(path), file_bytes(again));
}

TEST(Checkpoint, ArRoundTrip) {
  Checkpoint ckpt;
  ckpt.type = ModelType::ar;
  ckpt.ar.phi = {0.7, 0.2, -0.05};
  const auto path = fs::temp_directory_path() / "gapcast_test_ar.bin";
  save_checkpoint(path, ckpt);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.type, ModelType::ar);
  EXPECT_EQ(back.ar.phi, ckpt.ar.phi);
  EXPECT_FALSE(back.model.has_value());
}

TEST(Checkpoint, SpecMismatchRejected) {
  Checkpoint ckpt;
  ckpt.spec = small_spec(cells::CellKind::conv_lstm);
  ckpt.model.emplace(ckpt.spec, 1);
  const auto path = fs::temp_directory_path() / "gapcast_test_bad.bin";
  save_checkpoint(path, ckpt);
  // Rewrite the header so the spec claims a wider hidden layer than the stored tensors.
  std::string bytes = file_bytes(path);
  const auto pos = bytes.find("\"hidden_dims\":[4]");
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, 17, "\"hidden_dims\":[5]");
  std::ofstream(path, std::ios::binary) << bytes;
  EXPECT_THROW(load_checkpoint(path), CheckpointMismatch);
}

TEST(Checkpoint, ModelTypeNames) {
  for (auto t : {ModelType::neural, ModelType::ar, ModelType::last_scene, ModelType::all_zeros})
    EXPECT_EQ(parse_model_type(to_string(t)), t);
  EXPECT_THROW(parse_model_type("arima"), std::invalid_argument);
}

TEST(Trainer, LossDecreasesForEveryKind) {
  const auto prep = small_corpus(16, 10);
  for (auto kind : {cells::CellKind::lstm, cells::CellKind::time_lstm, cells::CellKind::time_aware_lstm,
                    cells::CellKind::conv_lstm, cells::CellKind::conv_time_lstm, cells::CellKind::conv_time_aware_lstm}) {
    dataset::SequenceStore store(prep.data);
    cells::Forecaster model(small_spec(kind, 3), 5);
    const auto r = train_model(model, store, prep.scaler, {.epochs = 8, .learning_rate = 1e-2, .seed = 1});
    ASSERT_FALSE(r.diverged) << r.failure;
    ASSERT_EQ(r.epoch_loss.size(), 8u);
    EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front()) << cells::to_string(kind);
  }
}

TEST(Trainer, BeatsAllZerosAndNeverTouchesHeldOutDataDuringGradients) {
  const auto prep = small_corpus();
  dataset::SequenceStore store(prep.data);
  cells::Forecaster model(small_spec(cells::CellKind::conv_time_lstm), 3);
  const auto r = train_model(model, store, prep.scaler, {.epochs = 15, .learning_rate = 1e-2, .seed = 2});
  ASSERT_FALSE(r.diverged);
  const double zeros = score_split(store, dataset::Split::validation, [](const dataset::SceneSequence& s) {
                         return baselines::all_zeros_forecast(s.target.grid.height, s.target.grid.width);
                       }).pooled;
  EXPECT_LT(r.validation_rmse, zeros);
  EXPECT_EQ(store.pixel_reads(dataset::Split::validation, dataset::Phase::gradient), 0u);
  EXPECT_EQ(store.pixel_reads(dataset::Split::test, dataset::Phase::gradient), 0u);
  EXPECT_GT(store.pixel_reads(dataset::Split::train, dataset::Phase::gradient), 0u);
  EXPECT_GT(store.pixel_reads(dataset::Split::validation, dataset::Phase::evaluation), 0u);
}

TEST(Trainer, CosineScheduleEndpoints) {
  EXPECT_EQ(cosine_learning_rate(1e-2, 0.1, 0, 50), 1e-2);
  EXPECT_NEAR(cosine_learning_rate(1e-2, 0.1, 49, 50), 1e-3, 1e-15);
  EXPECT_NEAR(cosine_learning_rate(1.0, 0.0, 50, 101), 0.5, 1e-15);
  EXPECT_EQ(cosine_learning_rate(3e-3, 1.0, 17, 40), 3e-3);
  double prev = 1.0;
  for (std::size_t s = 0; s < 30; ++s) {
    const double lr = cosine_learning_rate(1.0, 0.2, s, 30);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Trainer, DecayChangesTrajectoryAndBadFractionRejected) {
  const auto prep = small_corpus();
  auto run = [&](double fraction) {
    dataset::SequenceStore store(prep.data);
    cells::Forecaster model(small_spec(cells::CellKind::conv_lstm, 2), 4);
    train_model(model, store, prep.scaler, {.epochs = 2, .learning_rate = 1e-2, .final_lr_fraction = fraction, .seed = 1});
    std::vector<double> out;
    for (const auto& p : model.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
    return out;
  };
  EXPECT_NE(run(1.0), run(0.05));
  dataset::SequenceStore store(prep.data);
  cells::Forecaster model(small_spec(cells::CellKind::conv_lstm, 2), 4);
  EXPECT_THROW(train_model(model, store, prep.scaler, {.final_lr_fraction = 0.0}), std::invalid_argument);
}

TEST(Trainer, SameSeedSameParameters) {
  const auto prep = small_corpus(16, 10);
  auto run = [&] {
    dataset::SequenceStore store(prep.data);
    cells::Forecaster model(small_spec(cells::CellKind::time_aware_lstm, 2), 8);
    train_model(model, store, prep.scaler, {.epochs = 2, .seed = 3});
    std::vector<double> out;
    for (const auto& p : model.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Trainer, DivergenceIsReported) {
  const auto prep = small_corpus(16, 10);
  dataset::SequenceStore store(prep.data);
  cells::Forecaster model(small_spec(cells::CellKind::conv_lstm, 2), 8);
  const auto r = train_model(model, store, pipeline::ScalerParams{0.0, 1e-300}, {.epochs = 2});
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.failure.empty());
}

TEST(Trainer, TimeGateWeightsStayNonPositive) {
  const auto prep = small_corpus(16, 10);
  dataset::SequenceStore store(prep.data);
  cells::Forecaster model(small_spec(cells::CellKind::conv_time_lstm, 3), 4);
  train_model(model, store, prep.scaler, {.epochs = 3, .learning_rate = 0.1, .seed = 4});
  std::size_t constrained = 0;
  for (const auto& p : model.parameters()) {
    if (!p.nonpositive) continue;
    ++constrained;
    for (double v : p.tensor.data()) EXPECT_LE(v, 0.0) << p.name;
  }
  EXPECT_GT(constrained, 0u);
}

}  // namespace
}  // namespace gapcast::train
