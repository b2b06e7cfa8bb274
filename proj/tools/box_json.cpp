#include "box_json.hpp"

#include "catdet/errors.hpp"
#include "catdet/pointops/point_cloud.hpp"

namespace catdet::cli {

using nlohmann::json;

namespace {

Box3D parse_box(const json& j, std::size_t frame, std::size_t index) {
  const std::string where = "frame " + std::to_string(frame) + ", box " + std::to_string(index) + ": ";
  if (!j.is_object()) throw ParseError(where + "expected an object");
  if (!j.contains("class") || !j["class"].is_string()) throw ParseError(where + "missing string field 'class'");
  if (!j.contains("box") || !j["box"].is_array() || j["box"].size() != 7) {
    throw ParseError(where + "'box' must be an array of 7 numbers [x, y, z, h, w, l, theta]");
  }
  Box3D b;
  b.class_id = class_from_name(j["class"].get<std::string>());
  if (b.class_id == kBackground) throw ParseError(where + "unknown class '" + j["class"].get<std::string>() + "'");
  double v[7];
  for (std::size_t k = 0; k < 7; ++k) {
    if (!j["box"][k].is_number()) throw ParseError(where + "box entry " + std::to_string(k) + " is not a number");
    v[k] = j["box"][k].get<double>();
  }
  b.x = v[0], b.y = v[1], b.z = v[2], b.h = v[3], b.w = v[4], b.l = v[5], b.theta = v[6];
  if (j.contains("score")) {
    if (!j["score"].is_number()) throw ParseError(where + "'score' is not a number");
    b.score = j["score"].get<double>();
  }
  try {
    b.validate();
  } catch (const Error& e) {
    throw ParseError(where + e.what());
  }
  return b;
}

}  // namespace

eval::FrameBoxes parse_frame_boxes(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  const json& frames = doc.is_object() && doc.contains("frames") ? doc["frames"] : doc;
  if (!frames.is_array()) throw ParseError("expected an array of frames");
  eval::FrameBoxes out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (!frames[f].is_array()) throw ParseError("frame " + std::to_string(f) + ": expected an array of boxes");
    std::vector<Box3D> boxes;
    for (std::size_t i = 0; i < frames[f].size(); ++i) boxes.push_back(parse_box(frames[f][i], f, i));
    out.push_back(std::move(boxes));
  }
  return out;
}

json box_json(const Box3D& b) {
  return {{"class", std::string(class_name(b.class_id))}, {"box", {b.x, b.y, b.z, b.h, b.w, b.l, b.theta}}, {"score", b.score}};
}

json frame_boxes_json(const eval::FrameBoxes& frames) {
  json arr = json::array();
  for (const auto& f : frames) {
    json boxes = json::array();
    for (const Box3D& b : f) boxes.push_back(box_json(b));
    arr.push_back(boxes);
  }
  return {{"frames", arr}};
}

}  // namespace catdet::cli
