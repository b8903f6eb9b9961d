#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <set>

#include "gapcast/dataset/dataset.hpp"
#include "gapcast/dataset/store.hpp"
#include "gapcast/dataset/synth.hpp"
#include "gapcast/eval/eval.hpp"
#include "gapcast/pipeline/preprocess.hpp"

namespace gapcast::dataset {
namespace {

Date day(int n) { return parse_date("2005-06-01") + std::chrono::days(n); }

// Scenes whose grid value encodes (volcano index, scene index) and whose
// fill age is a per-pixel pattern, on irregular dates.
std::vector<Scene> make_scenes(const std::string& id, std::size_t count, int salt = 0) {
  std::vector<Scene> out;
  int d = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Scene s{id, day(d), Grid(3, 4, 100.0 * salt + static_cast<double>(i)), Grid(3, 4), 0.0};
    for (std::size_t k = 0; k < 12; ++k) s.fill_age.values[k] = static_cast<double>((k * 7 + i * 3) % 11);
    out.push_back(std::move(s));
    d += 5 + static_cast<int>((i * 13) % 29);
  }
  return out;
}

std::vector<VolcanoScenes> make_volcanoes() {
  return {{"a", make_scenes("a", 20, 1)}, {"b", make_scenes("b", 30, 2)}, {"c", make_scenes("c", 25, 3)}};
}

TEST(Acf, LagZeroIsOne) {
  const std::vector<double> x{1, 3, 2, 5, 4};
  EXPECT_EQ(acf(x, 3)[0], 1.0);
}

TEST(Acf, AlternatingSeries) {
  std::vector<double> x;
  for (int t = 0; t < 200; ++t) x.push_back(t % 2 ? -1.0 : 1.0);
  EXPECT_NEAR(acf(x, 1)[1], -1.0, 0.01);
}

TEST(Acf, WhiteNoiseIsSmall) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  std::vector<double> x(1000);
  for (auto& v : x) v = d(rng);
  const auto r = acf(x, 20);
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_LT(std::abs(r[k]), 0.1) << k;
}

TEST(Acf, HandComputedValue) {
  // mean 2.5, deviations -1.5 -0.5 0.5 1.5; lag 1 products 0.75 -0.25 0.75 over 5.
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_NEAR(acf(x, 1)[1], 1.25 / 5.0, 1e-15);
}

TEST(Acf, RejectsConstantAndShort) {
  const std::vector<double> c(10, 3.0);
  EXPECT_THROW(acf(c, 2), std::invalid_argument);
  const std::vector<double> s{1, 2};
  EXPECT_THROW(acf(s, 2), std::invalid_argument);
}

TEST(WindowLength, StrongArOneGivesAtLeastThree) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  std::vector<double> x{0.0};
  for (int t = 1; t < 300; ++t) x.push_back(0.95 * x.back() + d(rng));
  const auto n = select_window_length(x);
  EXPECT_GE(n, kMinWindow);
  EXPECT_LE(n, kMaxWindow);
}

TEST(WindowLength, NoSignificantLagGivesThree) {
  // A lone spike in 12 points has r_k = -k/132, far inside the 1.96/sqrt(12) bound.
  std::vector<double> x(12, 0.0);
  x[0] = 1.0;
  EXPECT_NEAR(acf(x, 5)[5], -5.0 / 132.0, 1e-15);
  EXPECT_EQ(select_window_length(x), 3u);
}

TEST(WindowLength, MatchesDirectScan) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{0.0};
    const double phi = 0.05 * trial;
    for (int t = 1; t < 100; ++t) x.push_back(phi * x.back() + d(rng));
    const auto r = acf(x, kMaxAcfLag);
    std::size_t largest = 0;
    for (std::size_t k = 1; k < r.size(); ++k)
      if (std::abs(r[k]) > 1.96 / std::sqrt(100.0)) largest = k;
    EXPECT_EQ(select_window_length(x), std::clamp<std::size_t>(largest, 3, 10));
  }
}

TEST(WindowLength, RejectsShortSeries) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  EXPECT_THROW(select_window_length(x), std::invalid_argument);
}

TEST(WindowLength, PooledIsRoundedMean) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d;
  std::vector<std::vector<double>> series;
  double sum = 0.0;
  for (double phi : {0.2, 0.9, 0.97}) {
    std::vector<double> x{0.0};
    for (int t = 1; t < 200; ++t) x.push_back(phi * x.back() + d(rng));
    sum += static_cast<double>(select_window_length(x));
    series.push_back(x);
  }
  EXPECT_EQ(pooled_window_length(series), static_cast<std::size_t>(std::lround(sum / 3.0)));
}

TEST(Sequences, Counts) {
  EXPECT_EQ(build_sequences(make_scenes("v", 7), 6).size(), 1u);
  EXPECT_EQ(build_sequences(make_scenes("v", 10), 6).size(), 4u);
  std::vector<std::string> warnings;
  EXPECT_TRUE(build_sequences(make_scenes("v", 6), 6, {}, &warnings).empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Sequences, GapsMatchDateScan) {
  const auto scenes = make_scenes("v", 12);
  const auto seqs = build_sequences(scenes, 4);
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const auto& q = seqs[s];
    EXPECT_EQ(q.dt_preceding[0], 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      const long following = (scenes[s + i + 1].date - scenes[s + i].date).count();
      EXPECT_EQ(q.dt_following[i], static_cast<double>(following));
      if (i > 0) {
        EXPECT_EQ(q.dt_preceding[i], static_cast<double>((scenes[s + i].date - scenes[s + i - 1].date).count()));
        EXPECT_EQ(q.dt_following[i - 1], q.dt_preceding[i]);
      }
    }
    EXPECT_EQ(q.target.date, scenes[s + 4].date);
  }
}

TEST(Sequences, TimeMapsAddFillAge) {
  const auto scenes = make_scenes("v", 6);
  const auto q = build_sequences(scenes, 3)[1];
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 12; ++k) {
      EXPECT_EQ(q.dt_maps_following[i].values[k], q.dt_following[i] + q.inputs[i].fill_age.values[k]);
      const double prev_age = i == 0 ? 0.0 : q.inputs[i - 1].fill_age.values[k];
      EXPECT_EQ(q.dt_maps_preceding[i].values[k], q.dt_preceding[i] + prev_age);
    }
  const auto plain = build_sequences(scenes, 3, {.fill_age_in_maps = false})[1];
  for (double v : plain.dt_maps_following[2].values) EXPECT_EQ(v, plain.dt_following[2]);
}

TEST(Splits, Counts) {
  EXPECT_EQ(split_counts(20, SplitSpec::standard()), (std::array<std::size_t, 3>{14, 3, 3}));
  EXPECT_EQ(split_counts(100, SplitSpec::standard()), (std::array<std::size_t, 3>{70, 15, 15}));
  EXPECT_EQ(split_counts(20, SplitSpec::train_test()), (std::array<std::size_t, 3>{17, 0, 3}));
  EXPECT_EQ(parse_split_mode("85/15").train, 0.85);
  EXPECT_THROW(parse_split_mode("60/40"), std::invalid_argument);
}

TEST(Splits, SizesSumToTotal) {
  for (std::size_t n = 0; n < 200; ++n)
    for (const auto& spec : {SplitSpec::standard(), SplitSpec::train_test()}) {
      const auto c = split_counts(n, spec);
      ASSERT_EQ(c[0] + c[1] + c[2], n);
    }
}

TEST(Dataset, NoSequenceCrossesSplitOrVolcano) {
  const auto vols = make_volcanoes();
  const auto data = build_dataset(vols, 3, SplitSpec::standard());
  for (const Split s : {Split::train, Split::validation, Split::test}) {
    for (const auto& q : data[s]) {
      const auto& scenes = std::find_if(vols.begin(), vols.end(), [&](const auto& v) { return v.volcano_id == q.volcano_id; })->scenes;
      const auto split = chronological_split(scenes, SplitSpec::standard());
      std::set<Date> dates;
      for (const auto& sc : split[s]) dates.insert(sc.date);
      for (const auto& in : q.inputs) {
        EXPECT_EQ(in.volcano_id, q.volcano_id);
        EXPECT_TRUE(dates.count(in.date));
      }
      EXPECT_TRUE(dates.count(q.target.date));
    }
  }
  // a: 14/3/3 scenes -> 11/0/0 sequences with n = 3.
  EXPECT_EQ(data.train.size(), 11u + 18u + 14u);
}

TEST(Dataset, ShortSplitIsEmptyWithWarning) {
  std::vector<std::string> warnings;
  const auto vols = make_volcanoes();
  const auto data = build_dataset(vols, 3, SplitSpec::standard(), {}, &warnings);
  EXPECT_FALSE(warnings.empty());
  for (const auto& q : data.validation) EXPECT_NE(q.volcano_id, "a");
}

TEST(Filter, MatchesSingleVolcanoConstruction) {
  const auto vols = make_volcanoes();
  const auto data = build_dataset(vols, 3, SplitSpec::standard());
  const auto filtered = filter_volcano(data, "b");
  const std::vector<VolcanoScenes> only_b{vols[1]};
  EXPECT_EQ(filtered.train, build_dataset(only_b, 3, SplitSpec::standard()).train);
  EXPECT_EQ(filtered.validation, data.validation);
  EXPECT_EQ(filter_volcano(filtered, "b"), filtered);
  EXPECT_THROW(filter_volcano(data, "zzz"), std::invalid_argument);
}

TEST(Filter, UnionOfFiltersIsTrainingSet) {
  const auto data = build_dataset(make_volcanoes(), 3, SplitSpec::standard());
  std::vector<SceneSequence> all;
  for (const auto& id : data.volcano_ids()) {
    const auto f = filter_volcano(data, id);
    all.insert(all.end(), f.train.begin(), f.train.end());
  }
  EXPECT_EQ(all, data.train);
}

TEST(Serialization, SequencesRoundTrip) {
  const auto data = build_dataset(make_volcanoes(), 4, SplitSpec::standard());
  const auto path = std::filesystem::temp_directory_path() / "gapcast_test_sequences.bin";
  write_sequences(path, data.train);
  const auto back = read_sequences(path);
  ASSERT_EQ(back, data.train);
  const pipeline::ScalerParams scaler{0.0, 500.0};
  const auto a = to_forecast_input(back[3], cells::CellKind::conv_time_lstm, scaler);
  const auto b = to_forecast_input(data.train[3], cells::CellKind::conv_time_lstm, scaler);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    EXPECT_TRUE(std::equal(a.frames[i].data().begin(), a.frames[i].data().end(), b.frames[i].data().begin()));
    EXPECT_TRUE(std::equal(a.dt_maps[i].data().begin(), a.dt_maps[i].data().end(), b.dt_maps[i].data().begin()));
  }
}

TEST(ForecastInput, ConventionFollowsKind) {
  const auto q = build_sequences(make_scenes("v", 5), 3)[0];
  const pipeline::ScalerParams scaler{0.0, 10.0};
  EXPECT_EQ(to_forecast_input(q, cells::CellKind::time_lstm, scaler).dt_days, q.dt_following);
  EXPECT_EQ(to_forecast_input(q, cells::CellKind::time_aware_lstm, scaler).dt_days, q.dt_preceding);
  EXPECT_TRUE(to_forecast_input(q, cells::CellKind::conv_lstm, scaler).dt_days.empty());
  EXPECT_DOUBLE_EQ(to_forecast_input(q, cells::CellKind::lstm, scaler).frames[1].data()[0], 0.1);
}

TEST(Store, BlocksHeldOutReadsInGradientPhase) {
  SequenceStore store(build_dataset(make_volcanoes(), 3, SplitSpec::standard()));
  EXPECT_NO_THROW(store.fetch(Split::train, 0, Phase::gradient));
  EXPECT_THROW(store.fetch(Split::validation, 0, Phase::gradient), SplitLeakError);
  EXPECT_THROW(store.fetch(Split::test, 0, Phase::gradient), SplitLeakError);
  EXPECT_NO_THROW(store.fetch(Split::validation, 0, Phase::evaluation));
  EXPECT_EQ(store.blocked_reads(), 2u);
  EXPECT_EQ(store.pixel_reads(Split::train, Phase::gradient), 4u * 12u);
  EXPECT_EQ(store.pixel_reads(Split::validation, Phase::gradient), 0u);
  EXPECT_EQ(store.pixel_reads(Split::validation, Phase::evaluation), 4u * 12u);
}

TEST(Synth, GapMeanNearTarget) {
  std::mt19937_64 rng(5);
  const GapDistribution dist;
  double sum = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double g = sample_gap(dist, rng);
    ASSERT_GE(g, 1.0);
    ASSERT_EQ(g, std::round(g));
    sum += g;
  }
  EXPECT_NEAR(sum / 500.0, 37.0, 0.2 * 37.0);
}

TEST(Synth, Deterministic) {
  const SynthConfig cfg{.seed = 9, .n_volcanoes = 2, .n_scenes = 8, .height = 24, .width = 24};
  const auto a = synthesize_corpus(cfg), b = synthesize_corpus(cfg);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t v = 0; v < a.size(); ++v) {
    ASSERT_EQ(a[v].rasters.size(), 8u);
    for (std::size_t i = 0; i < a[v].rasters.size(); ++i)
      ASSERT_EQ(std::memcmp(a[v].rasters[i].values.data(), b[v].rasters[i].values.data(), 24 * 24 * sizeof(double)), 0);
    EXPECT_EQ(io::to_json(a[v].manifest), io::to_json(b[v].manifest));
  }
  auto other = cfg;
  other.seed = 10;
  EXPECT_NE(synthesize_corpus(other)[0].rasters[0], a[0].rasters[0]);
}

TEST(Synth, TwoBlobsGiveHotPixels) {
  const std::vector<Blob> blobs{{20, 20, 50, 2}, {60, 70, 50, 2}};
  const Grid g = render_blobs(96, 96, 0.0, blobs);
  const auto p = eval::derive_point(g, day(0));
  EXPECT_GE(p.hotspot_count, 2u);
  EXPECT_GT(g.at(20, 20), eval::kHotThreshold);
  EXPECT_GT(g.at(60, 70), eval::kHotThreshold);
  eval::DeriveOptions comp;
  comp.counting = eval::HotspotCounting::components;
  EXPECT_EQ(eval::derive_point(g, day(0), comp).hotspot_count, 2u);
}

TEST(Synth, CorpusPreprocessesWithoutUnusableScenes) {
  const SynthConfig cfg{.seed = 11, .n_volcanoes = 2, .n_scenes = 20, .height = 24, .width = 24};
  for (const auto& v : synthesize_corpus(cfg)) {
    const auto out = pipeline::preprocess_volcano(v.manifest, v.rasters);
    EXPECT_EQ(out.scenes.size(), 20u);
    for (const auto& s : out.report.scenes) EXPECT_TRUE(s.usable) << s.reason;
  }
}

TEST(Synth, WriteCorpusLayout) {
  const auto dir = std::filesystem::temp_directory_path() / "gapcast_test_corpus";
  std::filesystem::remove_all(dir);
  const SynthConfig cfg{.seed = 12, .n_volcanoes = 2, .n_scenes = 3, .height = 12, .width = 12};
  write_corpus(dir, synthesize_corpus(cfg));
  const auto manifests = io::list_manifests(dir);
  ASSERT_EQ(manifests.size(), 2u);
  EXPECT_EQ(manifests[0].second.volcano_id, "synth_01");
  EXPECT_TRUE(std::filesystem::exists(dir / "synth_01" / "scene_000.f32"));
}

}  // namespace
}  // namespace gapcast::dataset
