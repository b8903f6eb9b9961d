#include "gapcast/pipeline/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gapcast::io {

using nlohmann::json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

}  // namespace

Grid read_raster(const fs::path& path, std::size_t height, std::size_t width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open raster " + path.string());
  std::vector<std::uint32_t> raw(height * width);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * 4) || in.peek() != std::char_traits<char>::eof()) {
    throw DataError("raster " + path.string() + " does not hold exactly " + std::to_string(height) + "x" +
                    std::to_string(width) + " float32 values");
  }
  Grid g(height, width);
  for (std::size_t k = 0; k < raw.size(); ++k) g.values[k] = static_cast<double>(std::bit_cast<float>(to_le(raw[k])));
  return g;
}

void write_raster(const fs::path& path, const Grid& grid) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<std::uint32_t> raw(grid.size());
  for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(grid.values[k])));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write raster " + path.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
}

json to_json(const Manifest& m) {
  json scenes = json::array();
  for (const auto& s : m.scenes) scenes.push_back({{"file", s.file}, {"date", format_date(s.date)}, {"label", s.label}});
  return {{"volcano_id", m.volcano_id}, {"width", m.width}, {"height", m.height}, {"scenes", scenes}};
}

Manifest manifest_from_json(const json& j) {
  try {
    Manifest m;
    m.volcano_id = j.at("volcano_id").get<std::string>();
    m.width = j.at("width").get<std::size_t>();
    m.height = j.at("height").get<std::size_t>();
    for (const auto& s : j.at("scenes")) {
      ManifestEntry e;
      e.file = s.at("file").get<std::string>();
      e.date = parse_date(s.at("date").get<std::string>());
      e.label = s.value("label", std::string("viable"));
      if (e.label != "viable" && e.label != "uncertain" && e.label != "nonviable") {
        throw DataError("scene " + e.file + " has unknown label '" + e.label + "'");
      }
      m.scenes.push_back(std::move(e));
    }
    if (m.volcano_id.empty() || m.width == 0 || m.height == 0) throw DataError("manifest needs volcano_id, width, height");
    for (std::size_t i = 1; i < m.scenes.size(); ++i) {
      if (m.scenes[i].date <= m.scenes[i - 1].date) {
        throw DataError("manifest for " + m.volcano_id + " is not in strictly increasing date order at " +
                        m.scenes[i].file);
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

Manifest read_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

void write_manifest(const fs::path& path, const Manifest& manifest) { write_text(path, to_json(manifest).dump(2) + "\n"); }

std::vector<std::pair<fs::path, Manifest>> list_manifests(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("manifest directory " + dir.string() + " does not exist");
  std::vector<std::pair<fs::path, Manifest>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      out.emplace_back(entry.path(), read_manifest(entry.path()));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second.volcano_id < b.second.volcano_id; });
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gapcast::io
