#include "gapcast/pipeline/preprocess.hpp"

#include "gapcast/core/container.hpp"

namespace gapcast::pipeline {

using nlohmann::json;

ProcessedVolcano preprocess_volcano(const io::Manifest& manifest, std::span<const Grid> rasters) {
  if (rasters.size() != manifest.scenes.size()) {
    throw std::invalid_argument("manifest lists " + std::to_string(manifest.scenes.size()) + " scenes but " +
                                std::to_string(rasters.size()) + " rasters were given");
  }
  ProcessedVolcano out;
  out.volcano_id = manifest.volcano_id;
  out.report.volcano_id = manifest.volcano_id;
  std::vector<Scene> subtracted;
  for (std::size_t i = 0; i < rasters.size(); ++i) {
    const auto& entry = manifest.scenes[i];
    SceneReport rep;
    rep.file = entry.file;
    rep.date = entry.date;
    rep.label = entry.label;
    rep.missing_raw = rasters[i].missing_count();
    if (entry.label == "nonviable") {
      rep.usable = false;
      rep.reason = "labelled nonviable";
      out.report.scenes.push_back(rep);
      continue;
    }
    const Grid filled = fill_recovery_pixels(rasters[i]);
    rep.recovery_filled = rep.missing_raw - filled.missing_count();
    try {
      const auto bg = estimate_background(filled);
      rep.background = bg.value;
      rep.path = bg.path;
      rep.background_windows = bg.windows.size();
      Scene s;
      s.volcano_id = manifest.volcano_id;
      s.date = entry.date;
      s.grid = subtract_background(filled, bg.value);
      s.background = bg.value;
      subtracted.push_back(std::move(s));
    } catch (const UnusableSceneError& e) {
      rep.usable = false;
      rep.reason = e.what();
    }
    out.report.scenes.push_back(rep);
  }
  auto carried = carry_forward_fill(subtracted);
  out.scenes = std::move(carried.scenes);
  out.report.carry = std::move(carried.report);
  return out;
}

ProcessedVolcano preprocess_manifest(const std::filesystem::path& manifest_path) {
  const auto manifest = io::read_manifest(manifest_path);
  std::vector<Grid> rasters;
  for (const auto& s : manifest.scenes) {
    rasters.push_back(io::read_raster(manifest_path.parent_path() / s.file, manifest.height, manifest.width));
  }
  return preprocess_volcano(manifest, rasters);
}

json report_json(const VolcanoReport& report) {
  json scenes = json::array();
  for (const auto& s : report.scenes) {
    json j = {{"file", s.file},
              {"date", format_date(s.date)},
              {"label", s.label},
              {"usable", s.usable},
              {"missing_raw", s.missing_raw},
              {"recovery_filled", s.recovery_filled}};
    if (s.usable) {
      j["background"] = s.background;
      j["background_path"] = s.path == BackgroundPath::corners ? "corners" : "perimeter";
      j["background_windows"] = s.background_windows;
    } else {
      j["reason"] = s.reason;
    }
    scenes.push_back(j);
  }
  return {{"volcano_id", report.volcano_id},
          {"scenes", scenes},
          {"carried_pixels", report.carry.carried},
          {"interpolated_pixels", report.carry.interpolated},
          {"never_observed_pixels", report.carry.never_observed}};
}

void write_processed(const std::filesystem::path& path, const ProcessedVolcano& volcano) {
  json scenes = json::array();
  std::vector<double> payload;
  std::size_t h = 0, w = 0;
  for (const auto& s : volcano.scenes) {
    h = s.grid.height;
    w = s.grid.width;
    scenes.push_back({{"date", format_date(s.date)}, {"background", s.background}});
    payload.insert(payload.end(), s.grid.values.begin(), s.grid.values.end());
    payload.insert(payload.end(), s.fill_age.values.begin(), s.fill_age.values.end());
  }
  io::write_container(path,
                      {{"format", "gapcast-processed"},
                       {"version", 1},
                       {"volcano_id", volcano.volcano_id},
                       {"height", h},
                       {"width", w},
                       {"scenes", scenes},
                       {"report", report_json(volcano.report)}},
                      payload);
}

ProcessedVolcano read_processed(const std::filesystem::path& path) {
  const auto c = io::read_container(path);
  if (c.header.value("format", std::string()) != "gapcast-processed") {
    throw io::DataError(path.string() + " is not a processed scene file");
  }
  ProcessedVolcano v;
  try {
    v.volcano_id = c.header.at("volcano_id").get<std::string>();
    v.report.volcano_id = v.volcano_id;
    const auto h = c.header.at("height").get<std::size_t>(), w = c.header.at("width").get<std::size_t>();
    const auto& scenes = c.header.at("scenes");
    if (c.payload.size() != scenes.size() * 2 * h * w) throw io::DataError(path.string() + ": payload size mismatch");
    auto it = c.payload.begin();
    for (const auto& e : scenes) {
      Scene s;
      s.volcano_id = v.volcano_id;
      s.date = parse_date(e.at("date").get<std::string>());
      s.background = e.at("background").get<double>();
      s.grid = Grid(h, w);
      std::copy_n(it, h * w, s.grid.values.begin());
      it += static_cast<std::ptrdiff_t>(h * w);
      s.fill_age = Grid(h, w);
      std::copy_n(it, h * w, s.fill_age.values.begin());
      it += static_cast<std::ptrdiff_t>(h * w);
      v.scenes.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw io::DataError(path.string() + ": malformed header: " + e.what());
  }
  return v;
}

}  // namespace gapcast::pipeline
