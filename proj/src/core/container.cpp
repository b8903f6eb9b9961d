#include "gapcast/core/container.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <cstring>
#include <iterator>

#include "gapcast/pipeline/io.hpp"

namespace gapcast::io {

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

}  // namespace

void write_container(const std::filesystem::path& path, const nlohmann::json& header, std::span<const double> payload) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << header.dump() << '\n';
  std::vector<std::uint64_t> raw(payload.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_le(std::bit_cast<std::uint64_t>(payload[i]));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  Container c;
  try {
    c.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": header is not valid JSON: " + e.what());
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw DataError(path.string() + ": payload is not a whole number of float64 values");
  c.payload.resize(bytes.size() / 8);
  for (std::size_t i = 0; i < c.payload.size(); ++i) {
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + 8 * i, 8);
    c.payload[i] = std::bit_cast<double>(to_le(v));
  }
  return c;
}

}  // namespace gapcast::io
