#pragma once

#include <cstdint>
#include <string_view>

#include "catdet/fusion/two_stream.hpp"
#include "catdet/kitti/scene.hpp"

namespace catdet::kitti {

/// Settings read from a flat `key = value` file. `preset` (paper or scaled)
/// must come first when present; later keys override the preset. Lines
/// starting with '#' are comments. See the README for the key list.
struct RunConfig {
  fusion::TwoStreamConfig model = fusion::TwoStreamConfig::scaled();
  SyntheticSceneSpec scene;
  std::uint64_t seed = 0;
  double threshold = 0.3;
  double tau = 0.07;
  double lambda = 0.15;
  double momentum = 0.999;
  std::size_t max_paste = 10;

  static RunConfig preset(std::string_view name);
};

/// Throws ParseError with the line (and field 1 for keys, 2 for values).
RunConfig parse_config(std::string_view text);

}  // namespace catdet::kitti
