#include "catdet/omda/object_db.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "catdet/errors.hpp"

namespace catdet::omda {
namespace {

constexpr double kInsideTolerance = 1e-6;

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

void ObjectSample::validate() const {
  box.validate();
  if (points.size() == 0) throw ArgumentError("object sample has no points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points.point(i);
    if (std::abs(p[0]) > 0.5 * box.l + kInsideTolerance || std::abs(p[1]) > 0.5 * box.w + kInsideTolerance ||
        std::abs(p[2]) > 0.5 * box.h + kInsideTolerance) {
      throw ArgumentError("object sample point " + std::to_string(i) + " lies outside its box");
    }
  }
}

ObjectSample crop_object(const PointCloud& scene, const Box3D& box, const std::string& source, double margin) {
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (box.contains(scene.point(i), margin)) inside.push_back(i);
  }
  if (inside.empty()) throw ArgumentError("crop_object: no points inside the box");
  ObjectSample s;
  s.box = box;
  s.source = source;
  s.points = select_points(scene, inside);
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto local = box.to_local(s.points.point(i));
    for (std::size_t k = 0; k < 3; ++k) s.points.coords(i, k) = local[k];
  }
  s.points.fg_score.reset();
  if (s.points.class_id) std::fill(s.points.class_id->begin(), s.points.class_id->end(), box.class_id);
  return s;
}

void save_object_db(const std::filesystem::path& dir, const std::vector<ObjectSample>& samples) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const ObjectSample& s = samples[k];
    s.validate();
    const std::string file = "object_" + std::to_string(k) + ".bin";
    std::vector<float> buf;
    buf.reserve(s.points.size() * 4);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) buf.push_back(static_cast<float>(s.points.coords(i, c)));
      buf.push_back(s.points.features ? static_cast<float>((*s.points.features)(i, 0)) : 0.0f);
    }
    std::ofstream f(dir / file, std::ios::binary);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!f) throw Error("failed writing " + (dir / file).string());
    const Box3D& b = s.box;
    index.push_back({{"file", file},
                     {"class", std::string(class_name(b.class_id))},
                     {"box", {b.x, b.y, b.z, b.h, b.w, b.l, b.theta}},
                     {"source", s.source},
                     {"points", s.points.size()}});
  }
  std::ofstream f(dir / "index.json");
  f << index.dump(2) << "\n";
  if (!f) throw Error("failed writing " + (dir / "index.json").string());
}

std::vector<ObjectSample> load_object_db(const std::filesystem::path& dir) {
  const std::vector<char> text = read_bytes(dir / "index.json");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("object db index: ") + e.what());
  }
  if (!index.is_array()) throw ParseError("object db index must be a JSON array");
  std::vector<ObjectSample> out;
  for (std::size_t k = 0; k < index.size(); ++k) {
    const auto& e = index[k];
    ObjectSample s;
    try {
      const auto box = e.at("box").get<std::vector<double>>();
      if (box.size() != 7) throw ParseError("box needs 7 values", k + 1);
      const int cls = class_from_name(e.at("class").get<std::string>());
      if (cls < 0) throw ParseError("unknown class " + e.at("class").get<std::string>(), k + 1);
      s.box = Box3D{box[0], box[1], box[2], box[3], box[4], box[5], box[6], cls, 1.0};
      s.source = e.value("source", "");
      const std::vector<char> bytes = read_bytes(dir / e.at("file").get<std::string>());
      if (bytes.empty() || bytes.size() % 16 != 0) throw ParseError("object point file has a partial record", k + 1);
      const std::size_t n = bytes.size() / 16;
      std::vector<float> buf(n * 4);
      std::memcpy(buf.data(), bytes.data(), bytes.size());
      Tensor coords({n, 3}), feats({n, 1});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) coords(i, c) = buf[i * 4 + c];
        feats(i, 0) = buf[i * 4 + 3];
      }
      s.points.coords = std::move(coords);
      s.points.features = std::move(feats);
      s.points.class_id = std::vector<int>(n, cls);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("object db entry: ") + ex.what(), k + 1);
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace catdet::omda
