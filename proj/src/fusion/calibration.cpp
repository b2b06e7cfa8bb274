#include "catdet/fusion/calibration.hpp"

#include <cmath>

#include "catdet/errors.hpp"
#include "catdet/numerics/eigen_view.hpp"

namespace catdet::fusion {
namespace {

using num::detail::MatrixRM;
using num::detail::view;

constexpr double kOrthoTolerance = 1e-6;
constexpr double kMinDepth = 1e-9;

void check_homogeneous(const Tensor& m, const char* name) {
  if (m.shape() != std::vector<std::size_t>{4, 4}) throw GeometryError(std::string(name) + " must be 4x4");
  for (std::size_t j = 0; j < 4; ++j) {
    if (m(3, j) != (j == 3 ? 1.0 : 0.0)) throw GeometryError(std::string(name) + ": last row must be [0, 0, 0, 1]");
  }
  const Eigen::Matrix3d r = view(m).block<3, 3>(0, 0);
  if (((r * r.transpose()) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kOrthoTolerance) {
    throw GeometryError(std::string(name) + ": rotation block is not orthonormal");
  }
}

Eigen::Matrix4d lidar_to_rect_matrix(const Calibration& c) {
  return Eigen::Matrix4d(view(c.r_rect)) * Eigen::Matrix4d(view(c.t_cam_from_lidar));
}

}  // namespace

Calibration Calibration::identity() {
  Calibration c;
  c.c_rect = Tensor::matrix({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}});
  c.r_rect = Tensor::matrix({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  c.t_cam_from_lidar = c.r_rect;
  return c;
}

void Calibration::validate() const {
  if (c_rect.shape() != std::vector<std::size_t>{3, 4}) throw GeometryError("c_rect must be 3x4");
  check_homogeneous(r_rect, "r_rect");
  check_homogeneous(t_cam_from_lidar, "t_cam_from_lidar");
}

Tensor Calibration::projection_matrix() const {
  const MatrixRM p = MatrixRM(view(c_rect)) * lidar_to_rect_matrix(*this);
  return num::detail::to_tensor(p);
}

std::array<double, 3> Calibration::lidar_to_rect(const std::array<double, 3>& p) const {
  const Eigen::Vector4d q = lidar_to_rect_matrix(*this) * Eigen::Vector4d(p[0], p[1], p[2], 1.0);
  return {q[0], q[1], q[2]};
}

std::array<double, 3> Calibration::rect_to_lidar(const std::array<double, 3>& p) const {
  const Eigen::Vector4d q = lidar_to_rect_matrix(*this).inverse() * Eigen::Vector4d(p[0], p[1], p[2], 1.0);
  return {q[0], q[1], q[2]};
}

Projection project_lidar_to_image(const Calibration& calib, const std::array<double, 3>& p) {
  for (double c : p) {
    if (!std::isfinite(c)) throw NumericError("project_lidar_to_image: non-finite point");
  }
  const Eigen::Vector4d rect = lidar_to_rect_matrix(calib) * Eigen::Vector4d(p[0], p[1], p[2], 1.0);
  const Eigen::Vector3d h = Eigen::Matrix<double, 3, 4>(view(calib.c_rect)) * rect;
  if (std::abs(h[2]) < kMinDepth) throw GeometryError("project_lidar_to_image: point lies on the camera plane");
  return {h[0] / h[2], h[1] / h[2], h[2]};
}

std::vector<Projection> project_points(const Calibration& calib, const Tensor& coords) {
  if (coords.rank() != 2 || coords.dim(1) != 3) throw ShapeError("project_points expects [N, 3] coordinates");
  const Eigen::Matrix<double, 3, 4> m = view(calib.projection_matrix());
  std::vector<Projection> out(coords.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Eigen::Vector3d h = m * Eigen::Vector4d(coords(i, 0), coords(i, 1), coords(i, 2), 1.0);
    if (std::abs(h[2]) < kMinDepth) {
      throw GeometryError("project_points: point " + std::to_string(i) + " lies on the camera plane");
    }
    out[i] = {h[0] / h[2], h[1] / h[2], h[2]};
  }
  return out;
}

bool in_image(const Projection& p, std::size_t width, std::size_t height) {
  return p.depth > 0.0 && p.u >= 0.0 && p.v >= 0.0 && p.u < static_cast<double>(width) &&
         p.v < static_cast<double>(height);
}

}  // namespace catdet::fusion
