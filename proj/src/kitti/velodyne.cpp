#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "catdet/errors.hpp"
#include "catdet/kitti/formats.hpp"

namespace catdet::kitti {

static_assert(std::endian::native == std::endian::little, "velodyne I/O assumes a little-endian host");

PointCloud parse_velodyne(std::string_view bytes) {
  if (bytes.empty()) throw ParseError("velodyne data is empty");
  if (bytes.size() % 16 != 0) {
    throw ParseError("velodyne data has " + std::to_string(bytes.size()) + " bytes, not a multiple of 16");
  }
  const std::size_t n = bytes.size() / 16;
  std::vector<float> raw(n * 4);
  std::memcpy(raw.data(), bytes.data(), bytes.size());
  PointCloud pc;
  pc.coords = Tensor({n, 3});
  Tensor intensity({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 3; ++k) pc.coords(i, k) = raw[i * 4 + k];
    intensity(i, 0) = raw[i * 4 + 3];
  }
  pc.features = std::move(intensity);
  return pc;
}

std::string write_velodyne(const PointCloud& pc) {
  const std::size_t n = pc.size();
  std::vector<float> raw(n * 4, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 3; ++k) raw[i * 4 + k] = static_cast<float>(pc.coords(i, k));
    if (pc.features) raw[i * 4 + 3] = static_cast<float>((*pc.features)(i, 0));
  }
  std::string out(n * 16, '\0');
  std::memcpy(out.data(), raw.data(), out.size());
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error("failed writing " + path.string());
}

PointCloud read_velodyne_file(const std::filesystem::path& path) {
  try {
    return parse_velodyne(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_velodyne_file(const std::filesystem::path& path, const PointCloud& pc) {
  write_text_file(path, write_velodyne(pc));
}

}  // namespace catdet::kitti
