#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "catdet/errors.hpp"
#include "catdet/kitti/formats.hpp"

namespace catdet::kitti {
namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line, std::size_t field) {
  double v = 0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError("cannot parse '" + std::string(tok) + "' as a number", line, field);
  }
  return v;
}

struct CalibEntry {
  std::vector<double> values;
  std::size_t line = 0;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

}  // namespace

fusion::Calibration parse_calib(std::string_view text) {
  std::map<std::string, CalibEntry, std::less<>> entries;
  const auto lines = lines_of(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto tokens = split_ws(lines[ln]);
    if (tokens.empty()) continue;
    std::string_view key = tokens[0];
    if (key.back() != ':') throw ParseError("expected 'KEY:' at the start of the line", ln + 1, 1);
    key.remove_suffix(1);
    CalibEntry e;
    e.line = ln + 1;
    for (std::size_t f = 1; f < tokens.size(); ++f) e.values.push_back(parse_double(tokens[f], ln + 1, f + 1));
    entries[std::string(key)] = std::move(e);
  }
  const auto get = [&](const char* key, std::size_t count) -> const CalibEntry& {
    const auto it = entries.find(key);
    if (it == entries.end()) throw ParseError(std::string("calibration key ") + key + " is missing");
    if (it->second.values.size() != count) {
      throw ParseError(std::string(key) + " needs " + std::to_string(count) + " values, found " +
                           std::to_string(it->second.values.size()),
                       it->second.line, it->second.values.size() < count ? it->second.values.size() + 2 : count + 2);
    }
    return it->second;
  };
  const auto& p2 = get("P2", 12).values;
  const auto& r0 = get("R0_rect", 9).values;
  const auto& tr = get("Tr_velo_to_cam", 12).values;

  fusion::Calibration c;
  c.c_rect = Tensor({3, 4}, p2);
  c.r_rect = Tensor({4, 4});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) c.r_rect(i, j) = r0[i * 3 + j];
  }
  c.r_rect(3, 3) = 1.0;
  c.t_cam_from_lidar = Tensor({4, 4});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) c.t_cam_from_lidar(i, j) = tr[i * 4 + j];
  }
  c.t_cam_from_lidar(3, 3) = 1.0;
  c.validate();
  return c;
}

std::string format_calib(const fusion::Calibration& c) {
  std::string out = "P2:";
  for (double v : c.c_rect.storage()) out += " " + fmt(v);
  out += "\nR0_rect:";
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) out += " " + fmt(c.r_rect(i, j));
  }
  out += "\nTr_velo_to_cam:";
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) out += " " + fmt(c.t_cam_from_lidar(i, j));
  }
  return out + "\n";
}

std::vector<Label> parse_labels(std::string_view text, const fusion::Calibration& calib) {
  std::vector<Label> out;
  const auto lines = lines_of(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto t = split_ws(lines[ln]);
    if (t.empty()) continue;
    if (t.size() != 15 && t.size() != 16) {
      throw ParseError("label line needs 15 fields (16 with a score), found " + std::to_string(t.size()), ln + 1,
                       std::min<std::size_t>(t.size(), 15) + 1);
    }
    const auto num = [&](std::size_t f) { return parse_double(t[f], ln + 1, f + 1); };
    Label l;
    l.type = std::string(t[0]);
    l.truncated = num(1);
    const double occ = num(2);
    if (occ != std::floor(occ)) throw ParseError("occlusion must be an integer", ln + 1, 3);
    l.occluded = static_cast<int>(occ);
    l.alpha = num(3);
    for (std::size_t k = 0; k < 4; ++k) l.bbox[k] = num(4 + k);
    l.h = num(8);
    l.w = num(9);
    l.l = num(10);
    for (std::size_t k = 0; k < 3; ++k) l.location[k] = num(11 + k);
    l.rotation_y = num(14);
    if (t.size() == 16) l.score = num(15);

    const int cls = class_from_name(l.type);
    l.excluded = cls == kBackground;
    if (l.excluded) {
      out.push_back(std::move(l));
      continue;
    }
    if (!(l.h > 0 && l.w > 0 && l.l > 0)) throw ParseError("box dimensions must be positive", ln + 1, 9);
    // Location is the bottom centre and camera y points down.
    const auto centre = calib.rect_to_lidar({l.location[0], l.location[1] - 0.5 * l.h, l.location[2]});
    const auto ahead = calib.rect_to_lidar(
        {l.location[0] + std::cos(l.rotation_y), l.location[1] - 0.5 * l.h, l.location[2] - std::sin(l.rotation_y)});
    l.box = Box3D{centre[0], centre[1], centre[2], l.h, l.w, l.l,
                  normalize_angle(std::atan2(ahead[1] - centre[1], ahead[0] - centre[0])), cls,
                  std::clamp(l.score, 0.0, 1.0)};
    out.push_back(std::move(l));
  }
  return out;
}

Label label_from_box(const Box3D& box, const fusion::Calibration& calib) {
  Label l;
  l.type = std::string(class_name(box.class_id));
  l.h = box.h;
  l.w = box.w;
  l.l = box.l;
  l.score = box.score;
  l.box = box;
  const auto c = calib.lidar_to_rect({box.x, box.y, box.z});
  const auto ahead = calib.lidar_to_rect({box.x + std::cos(box.theta), box.y + std::sin(box.theta), box.z});
  l.location = {c[0], c[1] + 0.5 * box.h, c[2]};
  l.rotation_y = normalize_angle(std::atan2(-(ahead[2] - c[2]), ahead[0] - c[0]));
  l.alpha = normalize_angle(l.rotation_y - std::atan2(c[0], c[2]));
  return l;
}

std::string format_labels(const std::vector<Label>& labels, bool with_score) {
  std::ostringstream os;
  os.precision(10);
  for (const Label& l : labels) {
    os << l.type << ' ' << l.truncated << ' ' << l.occluded << ' ' << l.alpha;
    for (double b : l.bbox) os << ' ' << b;
    os << ' ' << l.h << ' ' << l.w << ' ' << l.l;
    for (double v : l.location) os << ' ' << v;
    os << ' ' << l.rotation_y;
    if (with_score) os << ' ' << l.score;
    os << '\n';
  }
  return os.str();
}

std::vector<Box3D> target_boxes(const std::vector<Label>& labels) {
  std::vector<Box3D> out;
  for (const Label& l : labels) {
    if (!l.excluded) out.push_back(l.box);
  }
  return out;
}

}  // namespace catdet::kitti
