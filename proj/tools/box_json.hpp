#pragma once

#include <string_view>

#include <json.hpp>

#include "catdet/evalkit/average_precision.hpp"

namespace catdet::cli {

/// {"frames": [[{"class": "Car", "box": [x, y, z, h, w, l, theta], "score": 0.9}, ...], ...]}
/// A bare top-level array of frames is accepted too. Score defaults to 1.
eval::FrameBoxes parse_frame_boxes(std::string_view text);
nlohmann::json frame_boxes_json(const eval::FrameBoxes& frames);

nlohmann::json box_json(const Box3D& box);

}  // namespace catdet::cli
