#pragma once

#include <array>
#include <string>
#include <string_view>

namespace catdet {

inline constexpr int kCar = 0;
inline constexpr int kPedestrian = 1;
inline constexpr int kCyclist = 2;
inline constexpr int kNumClasses = 3;

std::string_view class_name(int class_id);
/// Returns kBackground (-1) for names outside the three detection classes.
int class_from_name(std::string_view name);

/// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

/// 7-DoF box in the LiDAR frame. (x, y, z) is the box centre; l runs along the
/// heading theta, w across it, h vertically.
struct Box3D {
  double x = 0, y = 0, z = 0;
  double h = 1, w = 1, l = 1;
  double theta = 0;
  int class_id = kCar;
  double score = 1.0;

  /// Throws ArgumentError unless h, w, l > 0, theta in (-pi, pi] and score in [0, 1].
  void validate() const;
  double volume() const { return h * w * l; }
  double bev_area() const { return w * l; }

  /// Point expressed in the box frame (origin at centre, x along heading).
  std::array<double, 3> to_local(const std::array<double, 3>& p) const;
  std::array<double, 3> to_world(const std::array<double, 3>& local) const;
  /// Closed containment test with an optional margin added to every half-extent.
  bool contains(const std::array<double, 3>& p, double margin = 0.0) const;
  /// BEV footprint corners, counter-clockwise.
  std::array<std::array<double, 2>, 4> bev_corners() const;
  /// The eight 3D corners: bottom face first, then top, each counter-clockwise.
  std::array<std::array<double, 3>, 8> corners() const;
};

}  // namespace catdet
