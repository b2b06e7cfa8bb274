#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "catdet/detection/box3d.hpp"
#include "catdet/fusion/calibration.hpp"
#include "catdet/pointops/point_cloud.hpp"

namespace catdet::kitti {

/// Little-endian float32 (x, y, z, intensity) records; intensity becomes a
/// one-channel feature. Throws ParseError for empty or partial input.
PointCloud parse_velodyne(std::string_view bytes);
std::string write_velodyne(const PointCloud& pc);
PointCloud read_velodyne_file(const std::filesystem::path& path);
void write_velodyne_file(const std::filesystem::path& path, const PointCloud& pc);

/// Reads P2 (3x4), R0_rect (3x3) and Tr_velo_to_cam (3x4); other keys are ignored.
fusion::Calibration parse_calib(std::string_view text);
std::string format_calib(const fusion::Calibration& calib);

struct Label {
  std::string type;
  double truncated = 0;
  int occluded = 0;
  double alpha = 0;
  std::array<double, 4> bbox{};
  double h = 0, w = 0, l = 0;
  std::array<double, 3> location{};  // bottom centre, rectified camera frame
  double rotation_y = 0;
  double score = 1.0;
  /// DontCare and unknown types stay in the list but are excluded from targets.
  bool excluded = false;
  Box3D box;  // LiDAR frame; meaningful unless excluded
};

/// 15 whitespace-separated fields per line (a 16th is read as the score).
std::vector<Label> parse_labels(std::string_view text, const fusion::Calibration& calib);
/// Camera-frame label line for a LiDAR-frame box.
Label label_from_box(const Box3D& box, const fusion::Calibration& calib);
std::string format_labels(const std::vector<Label>& labels, bool with_score = false);
/// Boxes of the non-excluded labels.
std::vector<Box3D> target_boxes(const std::vector<Label>& labels);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace catdet::kitti
