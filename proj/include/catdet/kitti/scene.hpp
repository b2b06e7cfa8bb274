#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "catdet/kitti/formats.hpp"

namespace catdet::kitti {

struct RangeConfig {
  std::array<double, 2> x{0.0, 70.4};
  std::array<double, 2> y{-40.0, 40.0};
  std::array<double, 2> z{-3.0, 1.0};
  std::size_t max_points = 16384;
};

/// Keeps points strictly inside the range, then subsamples uniformly without
/// replacement (seeded, original order kept) when more than max_points remain.
PointCloud crop_range(const PointCloud& pc, std::uint64_t seed, const RangeConfig& cfg = {});

/// Exactly n points: a seeded subset when there are more, all points plus
/// seeded duplicates when there are fewer.
PointCloud resample_to(const PointCloud& pc, std::size_t n, std::uint64_t seed);
/// The ascending index list behind resample_to.
std::vector<std::size_t> resample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

/// Sets class_id to the class of the containing box (kBackground outside all boxes).
void label_points(PointCloud& pc, const std::vector<Box3D>& boxes);

struct Frame {
  PointCloud cloud;
  Tensor image;  // [3, H, W], values in [0, 1]
  fusion::Calibration calib;
  std::vector<Label> labels;

  std::size_t image_width() const { return image.dim(2); }
  std::size_t image_height() const { return image.dim(1); }
};

struct SyntheticSceneSpec {
  std::uint64_t seed = 0;
  std::array<std::size_t, kNumClasses> counts{2, 1, 1};
  std::array<double, 2> x_range{8.0, 40.0};
  std::array<double, 2> y_range{-12.0, 12.0};
  std::size_t points_per_object = 200;
  /// Ground points per square metre of the placement region.
  double ground_density = 0.5;
  std::size_t image_width = 1280;
  std::size_t image_height = 384;
  double ground_z = -1.6;
  /// Minimum BEV gap between placed boxes.
  double margin = 0.5;

  void validate() const;
};

/// Camera at the LiDAR origin looking along +x with the KITTI axis convention.
fusion::Calibration synthetic_calibration(std::size_t image_width, std::size_t image_height);

/// Boxes without overlap, surface points slightly inside each box, ground
/// points outside all boxes, and a flat-shaded image of the projected boxes.
/// Throws GeometryError when a box cannot be placed within 1000 attempts.
Frame generate_synthetic(const SyntheticSceneSpec& spec);

/// Convex hull of the box corners projected into the image; empty when any
/// corner is behind the camera.
std::vector<std::array<double, 2>> projected_silhouette(const Box3D& box, const fusion::Calibration& calib);
bool point_in_convex(const std::vector<std::array<double, 2>>& hull, double u, double v);

/// RGB PNG with 8-bit channels.
Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Frame directory: velodyne.bin, image.png, calib.txt, label.txt.
Frame read_frame(const std::filesystem::path& dir);
void write_frame(const std::filesystem::path& dir, const Frame& frame);

}  // namespace catdet::kitti
