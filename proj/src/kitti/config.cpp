#include "catdet/kitti/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "catdet/errors.hpp"

namespace catdet::kitti {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok) {
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ArgumentError("invalid number '" + std::string(tok) + "'");
  return v;
}

bool parse_bool(std::string_view tok) {
  if (tok == "1" || tok == "true" || tok == "on") return true;
  if (tok == "0" || tok == "false" || tok == "off") return false;
  throw ArgumentError("invalid boolean '" + std::string(tok) + "'");
}

template <typename T, std::size_t N>
void parse_array(std::string_view v, std::array<T, N>& out) {
  const auto parts = split_list(v);
  if (parts.size() != N) throw ArgumentError("expected " + std::to_string(N) + " comma-separated values");
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<T>(parts[i]);
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

template <typename T>
Setter scalar(T RunConfig::*member) {
  return [member](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(v); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"seed", scalar(&RunConfig::seed)},
      {"threshold", scalar(&RunConfig::threshold)},
      {"tau", scalar(&RunConfig::tau)},
      {"lambda", scalar(&RunConfig::lambda)},
      {"momentum", scalar(&RunConfig::momentum)},
      {"max_paste", scalar(&RunConfig::max_paste)},
      {"point.root_points", [](RunConfig& c, auto v) { c.model.point.root_points = parse_number<std::size_t>(v); }},
      {"point.counts", [](RunConfig& c, auto v) { parse_array(v, c.model.point.counts); }},
      {"point.radii", [](RunConfig& c, auto v) { parse_array(v, c.model.point.radii); }},
      {"point.channels", [](RunConfig& c, auto v) { parse_array(v, c.model.point.channels); }},
      {"point.neighbors", [](RunConfig& c, auto v) { parse_array(v, c.model.point.neighbors); }},
      {"point.projection_dim", [](RunConfig& c, auto v) { c.model.point.projection_dim = parse_number<std::size_t>(v); }},
      {"point.fp_channels", [](RunConfig& c, auto v) { parse_array(v, c.model.point.fp_channels); }},
      {"image.width", [](RunConfig& c, auto v) { c.model.image.width = parse_number<std::size_t>(v); }},
      {"image.height", [](RunConfig& c, auto v) { c.model.image.height = parse_number<std::size_t>(v); }},
      {"image.channels", [](RunConfig& c, auto v) { parse_array(v, c.model.image.channels); }},
      {"image.patches", [](RunConfig& c, auto v) { parse_array(v, c.model.image.patches); }},
      {"image.heads", [](RunConfig& c, auto v) { c.model.image.heads = parse_number<std::size_t>(v); }},
      {"image.embed_dim", [](RunConfig& c, auto v) { c.model.image.embed_dim = parse_number<std::size_t>(v); }},
      {"image.up_channels", [](RunConfig& c, auto v) { c.model.image.up_channels = parse_number<std::size_t>(v); }},
      {"image.out_channels", [](RunConfig& c, auto v) { c.model.image.out_channels = parse_number<std::size_t>(v); }},
      {"cmt.layers",
       [](RunConfig& c, auto v) {
         const auto parts = split_list(v);
         if (parts.size() != fusion::kCmtLayers) throw ArgumentError("expected 5 comma-separated switches");
         for (std::size_t i = 0; i < parts.size(); ++i) c.model.cmt_layers[i] = parse_bool(parts[i]);
       }},
      {"cmt.scale_attention", [](RunConfig& c, auto v) { c.model.cmt.scale_attention = parse_bool(v); }},
      {"cmt.block_rows", [](RunConfig& c, auto v) { c.model.cmt.block_rows = parse_number<std::size_t>(v); }},
      {"scene.seed", [](RunConfig& c, auto v) { c.scene.seed = parse_number<std::uint64_t>(v); }},
      {"scene.counts", [](RunConfig& c, auto v) { parse_array(v, c.scene.counts); }},
      {"scene.x_range", [](RunConfig& c, auto v) { parse_array(v, c.scene.x_range); }},
      {"scene.y_range", [](RunConfig& c, auto v) { parse_array(v, c.scene.y_range); }},
      {"scene.points_per_object",
       [](RunConfig& c, auto v) { c.scene.points_per_object = parse_number<std::size_t>(v); }},
      {"scene.ground_density", [](RunConfig& c, auto v) { c.scene.ground_density = parse_number<double>(v); }},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::preset(std::string_view name) {
  RunConfig c;
  if (name == "paper") {
    c.model = fusion::TwoStreamConfig::paper();
  } else if (name == "scaled") {
    c.model = fusion::TwoStreamConfig::scaled();
  } else {
    throw ArgumentError("unknown preset '" + std::string(name) + "' (expected paper or scaled)");
  }
  c.scene.image_width = c.model.image.width;
  c.scene.image_height = c.model.image.height;
  if (name == "scaled") {
    c.scene.counts = {1, 1, 0};
    c.scene.x_range = {8.0, 24.0};
    c.scene.y_range = {-6.0, 6.0};
    c.scene.points_per_object = 96;
    c.scene.ground_density = 1.0;
  } else {
    c.scene.counts = {4, 2, 2};
    c.scene.x_range = {6.0, 60.0};
    c.scene.y_range = {-20.0, 20.0};
    c.scene.points_per_object = 600;
    c.scene.ground_density = 8.0;
  }
  return c;
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg = RunConfig::preset("scaled");
  std::size_t line_no = 0, start = 0;
  bool seen_key = false;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::string_view raw = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no, 1);
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (value.empty()) throw ParseError("missing value for '" + std::string(key) + "'", line_no, 2);
    try {
      if (key == "preset") {
        if (seen_key) throw ArgumentError("preset must precede all other keys");
        cfg = RunConfig::preset(value);
      } else {
        const auto it = setters().find(key);
        if (it == setters().end()) throw ParseError("unknown key '" + std::string(key) + "'", line_no, 1);
        it->second(cfg, value);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(std::string(key) + ": " + e.what(), line_no, 2);
    }
    seen_key = true;
  }
  cfg.scene.image_width = cfg.model.image.width;
  cfg.scene.image_height = cfg.model.image.height;
  try {
    cfg.model.validate();
    cfg.scene.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

}  // namespace catdet::kitti
