#include "gapcast/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "gapcast/core/container.hpp"
#include "gapcast/pipeline/io.hpp"

namespace gapcast::dataset {

using nlohmann::json;

std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) {
    throw std::invalid_argument("autocorrelation up to lag " + std::to_string(max_lag) + " needs more than " +
                                std::to_string(max_lag) + " points, got " + std::to_string(n));
  }
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) throw std::invalid_argument("autocorrelation of a constant series is undefined");
  std::vector<double> r(max_lag + 1);
  r[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (series[t] - mean) * (series[t + k] - mean);
    r[k] = num / denom;
  }
  return r;
}

std::size_t select_window_length(std::span<const double> series) {
  if (series.size() < kMinAcfPoints) {
    throw std::invalid_argument("window selection needs at least " + std::to_string(kMinAcfPoints) +
                                " points, got " + std::to_string(series.size()));
  }
  const std::size_t max_lag = std::min(series.size() - 1, kMaxAcfLag);
  const auto r = acf(series, max_lag);
  const double bound = 1.96 / std::sqrt(static_cast<double>(series.size()));
  std::size_t largest = 0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    if (std::abs(r[k]) > bound) largest = k;
  }
  return std::clamp(largest, kMinWindow, kMaxWindow);
}

std::size_t pooled_window_length(std::span<const std::vector<double>> per_volcano_series) {
  if (per_volcano_series.empty()) throw std::invalid_argument("pooled window selection needs at least one series");
  double sum = 0.0;
  for (const auto& s : per_volcano_series) sum += static_cast<double>(select_window_length(s));
  return static_cast<std::size_t>(std::lround(sum / static_cast<double>(per_volcano_series.size())));
}

std::vector<double> max_temperature_series(std::span<const Scene> scenes) {
  std::vector<double> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : s.grid.values) {
      if (!is_missing(v)) m = std::max(m, v);
    }
    out.push_back(m);
  }
  return out;
}

std::vector<SceneSequence> build_sequences(std::span<const Scene> scenes, std::size_t n,
                                           const SequenceOptions& options, std::vector<std::string>* warnings) {
  if (n == 0) throw std::invalid_argument("window length must be at least 1");
  std::vector<SceneSequence> out;
  if (scenes.size() < n + 1) {
    if (warnings) {
      warnings->push_back((scenes.empty() ? std::string("(no scenes)") : scenes.front().volcano_id) + ": " +
                          std::to_string(scenes.size()) + " scenes cannot form a window of " + std::to_string(n) +
                          " inputs plus a target");
    }
    return out;
  }
  for (std::size_t i = 1; i < scenes.size(); ++i) {
    if (scenes[i].volcano_id != scenes[0].volcano_id) throw std::invalid_argument("scenes mix volcanoes");
    if (scenes[i].date <= scenes[i - 1].date) throw std::invalid_argument("scenes are not chronological");
  }
  for (std::size_t start = 0; start + n < scenes.size(); ++start) {
    SceneSequence seq;
    seq.volcano_id = scenes[start].volcano_id;
    seq.inputs.assign(scenes.begin() + static_cast<std::ptrdiff_t>(start),
                      scenes.begin() + static_cast<std::ptrdiff_t>(start + n));
    seq.target = scenes[start + n];
    for (std::size_t i = 0; i < n; ++i) {
      const Scene& cur = seq.inputs[i];
      const Scene& next = i + 1 < n ? seq.inputs[i + 1] : seq.target;
      const double following = days_between(cur.date, next.date);
      const double preceding = i == 0 ? 0.0 : days_between(seq.inputs[i - 1].date, cur.date);
      seq.dt_following.push_back(following);
      seq.dt_preceding.push_back(preceding);

      Grid fmap(cur.grid.height, cur.grid.width, following);
      Grid pmap(cur.grid.height, cur.grid.width, preceding);
      if (options.fill_age_in_maps) {
        for (std::size_t k = 0; k < fmap.size(); ++k) fmap.values[k] += cur.fill_age.values[k];
        if (i > 0) {
          for (std::size_t k = 0; k < pmap.size(); ++k) pmap.values[k] += seq.inputs[i - 1].fill_age.values[k];
        }
      }
      seq.dt_maps_following.push_back(std::move(fmap));
      seq.dt_maps_preceding.push_back(std::move(pmap));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "unknown";
}

void SplitSpec::validate() const {
  if (train < 0 || validation < 0 || test < 0) throw std::invalid_argument("split fractions must be non-negative");
  if (std::abs(train + validation + test - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
}

SplitSpec parse_split_mode(std::string_view mode) {
  if (mode == "70/15/15") return SplitSpec::standard();
  if (mode == "85/15") return SplitSpec::train_test();
  throw std::invalid_argument("unknown split mode '" + std::string(mode) + "' (expected 70/15/15 or 85/15)");
}

std::array<std::size_t, 3> split_counts(std::size_t n_scenes, const SplitSpec& spec) {
  spec.validate();
  const double n = static_cast<double>(n_scenes);
  const auto b1 = static_cast<std::size_t>(std::floor(spec.train * n + 1e-9));
  const auto b2 = std::max(b1, static_cast<std::size_t>(std::floor((spec.train + spec.validation) * n + 1e-9)));
  return {b1, b2 - b1, n_scenes - b2};
}

const std::vector<Scene>& SceneSplit::operator[](Split s) const {
  return s == Split::train ? train : s == Split::validation ? validation : test;
}

SceneSplit chronological_split(std::span<const Scene> scenes, const SplitSpec& spec) {
  const auto counts = split_counts(scenes.size(), spec);
  SceneSplit out;
  auto it = scenes.begin();
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(counts[0]));
  it += static_cast<std::ptrdiff_t>(counts[0]);
  out.validation.assign(it, it + static_cast<std::ptrdiff_t>(counts[1]));
  it += static_cast<std::ptrdiff_t>(counts[1]);
  out.test.assign(it, scenes.end());
  return out;
}

const std::vector<SceneSequence>& Dataset::operator[](Split s) const {
  return s == Split::train ? train : s == Split::validation ? validation : test;
}

std::vector<std::string> Dataset::volcano_ids() const {
  std::set<std::string> ids;
  for (const auto* part : {&train, &validation, &test})
    for (const auto& s : *part) ids.insert(s.volcano_id);
  return {ids.begin(), ids.end()};
}

Dataset build_dataset(std::span<const VolcanoScenes> volcanoes, std::size_t n, const SplitSpec& spec,
                      const SequenceOptions& options, std::vector<std::string>* warnings) {
  Dataset data;
  data.window_length = n;
  for (const auto& v : volcanoes) {
    const auto split = chronological_split(v.scenes, spec);
    for (Split s : {Split::train, Split::validation, Split::test}) {
      if (split[s].empty()) continue;
      std::vector<std::string> local;
      auto seqs = build_sequences(split[s], n, options, &local);
      if (warnings) {
        for (auto& w : local) warnings->push_back(std::string(to_string(s)) + " split of " + w);
      }
      auto& dst = s == Split::train ? data.train : s == Split::validation ? data.validation : data.test;
      dst.insert(dst.end(), std::make_move_iterator(seqs.begin()), std::make_move_iterator(seqs.end()));
    }
  }
  return data;
}

Dataset filter_volcano(const Dataset& data, const std::string& volcano_id) {
  const auto ids = data.volcano_ids();
  if (std::find(ids.begin(), ids.end(), volcano_id) == ids.end()) {
    throw std::invalid_argument("unknown volcano '" + volcano_id + "'");
  }
  Dataset out = data;
  out.train.clear();
  for (const auto& s : data.train) {
    if (s.volcano_id == volcano_id) out.train.push_back(s);
  }
  return out;
}

namespace {

void append(std::vector<double>& payload, const Grid& g) { payload.insert(payload.end(), g.values.begin(), g.values.end()); }

Grid take(std::span<const double>& payload, std::size_t h, std::size_t w) {
  if (payload.size() < h * w) throw io::DataError("sequence file payload is truncated");
  Grid g(h, w);
  std::copy_n(payload.begin(), h * w, g.values.begin());
  payload = payload.subspan(h * w);
  return g;
}

}  // namespace

void write_sequences(const std::filesystem::path& path, std::span<const SceneSequence> sequences) {
  json entries = json::array();
  std::vector<double> payload;
  for (const auto& s : sequences) {
    json dates = json::array(), backgrounds = json::array();
    for (const auto& sc : s.inputs) {
      dates.push_back(format_date(sc.date));
      backgrounds.push_back(sc.background);
    }
    const Grid& g0 = s.target.grid;
    entries.push_back({{"volcano_id", s.volcano_id},
                       {"height", g0.height},
                       {"width", g0.width},
                       {"input_dates", dates},
                       {"input_backgrounds", backgrounds},
                       {"target_date", format_date(s.target.date)},
                       {"target_background", s.target.background},
                       {"dt_preceding", s.dt_preceding},
                       {"dt_following", s.dt_following}});
    for (const auto& sc : s.inputs) {
      append(payload, sc.grid);
      append(payload, sc.fill_age);
    }
    append(payload, s.target.grid);
    append(payload, s.target.fill_age);
    for (const auto& m : s.dt_maps_preceding) append(payload, m);
    for (const auto& m : s.dt_maps_following) append(payload, m);
  }
  io::write_container(path, {{"format", "gapcast-sequences"}, {"version", 1}, {"sequences", entries}}, payload);
}

std::vector<SceneSequence> read_sequences(const std::filesystem::path& path) {
  auto c = io::read_container(path);
  if (c.header.value("format", std::string()) != "gapcast-sequences") {
    throw io::DataError(path.string() + " is not a sequence file");
  }
  std::span<const double> payload(c.payload);
  std::vector<SceneSequence> out;
  try {
    for (const auto& e : c.header.at("sequences")) {
      SceneSequence s;
      s.volcano_id = e.at("volcano_id").get<std::string>();
      const auto h = e.at("height").get<std::size_t>(), w = e.at("width").get<std::size_t>();
      const auto dates = e.at("input_dates").get<std::vector<std::string>>();
      const auto backgrounds = e.at("input_backgrounds").get<std::vector<double>>();
      for (std::size_t i = 0; i < dates.size(); ++i) {
        Scene sc;
        sc.volcano_id = s.volcano_id;
        sc.date = parse_date(dates[i]);
        sc.background = backgrounds.at(i);
        sc.grid = take(payload, h, w);
        sc.fill_age = take(payload, h, w);
        s.inputs.push_back(std::move(sc));
      }
      s.target.volcano_id = s.volcano_id;
      s.target.date = parse_date(e.at("target_date").get<std::string>());
      s.target.background = e.at("target_background").get<double>();
      s.target.grid = take(payload, h, w);
      s.target.fill_age = take(payload, h, w);
      s.dt_preceding = e.at("dt_preceding").get<std::vector<double>>();
      s.dt_following = e.at("dt_following").get<std::vector<double>>();
      for (std::size_t i = 0; i < dates.size(); ++i) s.dt_maps_preceding.push_back(take(payload, h, w));
      for (std::size_t i = 0; i < dates.size(); ++i) s.dt_maps_following.push_back(take(payload, h, w));
      out.push_back(std::move(s));
    }
  } catch (const json::exception& ex) {
    throw io::DataError(path.string() + ": malformed sequence header: " + ex.what());
  }
  if (!payload.empty()) throw io::DataError(path.string() + ": trailing payload values");
  return out;
}

namespace {

nd::Tensor grid_tensor(const Grid& g) { return nd::Tensor::from({1, g.height, g.width}, g.values); }

}  // namespace

cells::ForecastInput to_forecast_input(const SceneSequence& seq, cells::CellKind kind,
                                       const pipeline::ScalerParams& scaler) {
  cells::ForecastInput in;
  for (const auto& s : seq.inputs) in.frames.push_back(grid_tensor(scaler.scale(s.grid)));
  switch (cells::time_convention(kind)) {
    case cells::TimeConvention::following:
      in.dt_days = seq.dt_following;
      for (const auto& m : seq.dt_maps_following) in.dt_maps.push_back(grid_tensor(m));
      break;
    case cells::TimeConvention::preceding:
      in.dt_days = seq.dt_preceding;
      for (const auto& m : seq.dt_maps_preceding) in.dt_maps.push_back(grid_tensor(m));
      break;
    case cells::TimeConvention::none: break;
  }
  return in;
}

nd::Tensor target_tensor(const SceneSequence& seq, const pipeline::ScalerParams& scaler) {
  return grid_tensor(scaler.scale(seq.target.grid));
}

}  // namespace gapcast::dataset
