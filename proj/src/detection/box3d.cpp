#include "catdet/detection/box3d.hpp"

#include <cmath>
#include <numbers>

#include "catdet/errors.hpp"
#include "catdet/pointops/point_cloud.hpp"

namespace catdet {

std::string_view class_name(int class_id) {
  switch (class_id) {
    case kCar:
      return "Car";
    case kPedestrian:
      return "Pedestrian";
    case kCyclist:
      return "Cyclist";
    default:
      return "DontCare";
  }
}

int class_from_name(std::string_view name) {
  if (name == "Car") return kCar;
  if (name == "Pedestrian") return kPedestrian;
  if (name == "Cyclist") return kCyclist;
  return kBackground;
}

double normalize_angle(double theta) {
  constexpr double pi = std::numbers::pi;
  double t = std::fmod(theta, 2.0 * pi);
  if (t <= -pi) t += 2.0 * pi;
  if (t > pi) t -= 2.0 * pi;
  return t;
}

void Box3D::validate() const {
  if (!(h > 0.0 && w > 0.0 && l > 0.0)) throw ArgumentError("box dimensions must be positive");
  if (!(theta > -std::numbers::pi && theta <= std::numbers::pi)) throw ArgumentError("box heading must lie in (-pi, pi]");
  if (!(score >= 0.0 && score <= 1.0)) throw ArgumentError("box score must lie in [0, 1]");
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) throw ArgumentError("box centre must be finite");
}

std::array<double, 3> Box3D::to_local(const std::array<double, 3>& p) const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double dx = p[0] - x, dy = p[1] - y;
  return {c * dx + s * dy, -s * dx + c * dy, p[2] - z};
}

std::array<double, 3> Box3D::to_world(const std::array<double, 3>& local) const {
  const double c = std::cos(theta), s = std::sin(theta);
  return {x + c * local[0] - s * local[1], y + s * local[0] + c * local[1], z + local[2]};
}

bool Box3D::contains(const std::array<double, 3>& p, double margin) const {
  const auto q = to_local(p);
  return std::abs(q[0]) <= l / 2 + margin && std::abs(q[1]) <= w / 2 + margin && std::abs(q[2]) <= h / 2 + margin;
}

std::array<std::array<double, 2>, 4> Box3D::bev_corners() const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double hl = l / 2, hw = w / 2;
  const std::array<std::array<double, 2>, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<std::array<double, 2>, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {x + c * local[i][0] - s * local[i][1], y + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

std::array<std::array<double, 3>, 8> Box3D::corners() const {
  const auto bev = bev_corners();
  std::array<std::array<double, 3>, 8> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {bev[i][0], bev[i][1], z - h / 2};
    out[i + 4] = {bev[i][0], bev[i][1], z + h / 2};
  }
  return out;
}

}  // namespace catdet
