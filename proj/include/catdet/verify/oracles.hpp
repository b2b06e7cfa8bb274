#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "catdet/detection/box3d.hpp"
#include "catdet/evalkit/average_precision.hpp"
#include "catdet/fusion/calibration.hpp"
#include "catdet/numerics/ops.hpp"

namespace catdet::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Brute-force references, kept independent of the library kernels.

/// Max-min selection recomputing every distance to the chosen set at each step.
std::vector<std::size_t> fps_reference(const Tensor& coords, std::size_t count, std::size_t start = 0);
/// All indices within `radius` of the centroid, ascending.
std::vector<std::size_t> ball_reference(const Tensor& coords, std::size_t centroid, double radius);
/// Jittered-grid estimate of the BEV intersection area on a grid x grid lattice
/// over the joint bounding rectangle.
double monte_carlo_bev_intersection(const Box3D& a, const Box3D& b, std::size_t grid, num::Rng& rng);
/// IoU from the estimated intersection and exact box areas and volumes.
double monte_carlo_bev_iou(const Box3D& a, const Box3D& b, std::size_t grid, num::Rng& rng);
double monte_carlo_iou_3d(const Box3D& a, const Box3D& b, std::size_t grid, num::Rng& rng);
/// Pixel coordinates by applying the three calibration matrices one at a time.
std::array<double, 3> projection_reference(const fusion::Calibration& calib, const std::array<double, 3>& p);

/// A detection set with AP values worked out by hand.
struct ApCase {
  std::string name;
  int class_id = kCar;
  eval::FrameBoxes detections;
  eval::FrameBoxes ground_truth;
  double ap11 = 0;
  double ap40 = 0;
};

std::vector<ApCase> constructed_ap_cases();

CheckResult check_fps(std::size_t seeds = 50, std::size_t max_points = 128);
CheckResult check_ball_query(std::size_t seeds = 50, std::size_t max_points = 128);
CheckResult check_rotated_iou(std::size_t pairs = 10, std::uint64_t seed = 0, std::size_t grid = 1000,
                              double tolerance = 1e-3);
CheckResult check_projection(std::size_t trials = 200, std::uint64_t seed = 0, double tolerance = 1e-9);
CheckResult check_ap_cases(double tolerance = 1e-9);
CheckResult check_codec_identity(std::size_t boxes = 1000, std::uint64_t seed = 0, double tolerance = 1e-9);
/// Perfect detections score 100 and no detections score 0 at both recall grids.
CheckResult check_trivial_detectors(std::uint64_t seed = 0);

}  // namespace catdet::verify
