#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "catdet/tensor.hpp"

namespace catdet::fusion {

/// Camera calibration in homogeneous form. A LiDAR point p maps to pixels via
/// c_rect * r_rect * t_cam_from_lidar * [p; 1] = [z u, z v, z].
struct Calibration {
  Tensor c_rect;            // [3, 4]
  Tensor r_rect;            // [4, 4]
  Tensor t_cam_from_lidar;  // [4, 4]

  static Calibration identity();
  /// Throws GeometryError unless shapes match, rotation blocks are orthonormal
  /// within 1e-6 and the homogeneous rows are [0, 0, 0, 1].
  void validate() const;

  /// The composed 3x4 matrix c_rect * r_rect * t_cam_from_lidar.
  Tensor projection_matrix() const;
  /// LiDAR point to the rectified camera frame and back.
  std::array<double, 3> lidar_to_rect(const std::array<double, 3>& p) const;
  std::array<double, 3> rect_to_lidar(const std::array<double, 3>& p) const;
};

struct Projection {
  double u = 0, v = 0, depth = 0;
};

/// Throws GeometryError when the projected depth is within 1e-9 of zero.
Projection project_lidar_to_image(const Calibration& calib, const std::array<double, 3>& p);
std::vector<Projection> project_points(const Calibration& calib, const Tensor& coords);

/// True when the projection lies in front of the camera and inside [0, width) x [0, height).
bool in_image(const Projection& p, std::size_t width, std::size_t height);

}  // namespace catdet::fusion
