#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "catdet/tensor.hpp"

namespace catdet {

/// Class label for points that belong to no object.
inline constexpr int kBackground = -1;

/// Points in the LiDAR frame (x forward, y left, z up), meters.
struct PointCloud {
  Tensor coords;                                // [N, 3]
  std::optional<Tensor> features;               // [N, C]
  std::optional<std::vector<double>> fg_score;  // [N], each in [0, 1]
  std::optional<std::vector<int>> class_id;     // [N], kBackground for background

  std::size_t size() const { return coords.empty() ? 0 : coords.dim(0); }
  std::size_t feature_width() const { return features ? features->dim(1) : 0; }
  std::array<double, 3> point(std::size_t i) const {
    return {coords(i, 0), coords(i, 1), coords(i, 2)};
  }

  /// Throws if the cloud is empty or any optional field is misaligned or out of range.
  void validate() const;
};

/// Points `indices` with every optional field carried along.
PointCloud select_points(const PointCloud& pc, std::span<const std::size_t> indices);

/// Concatenates two clouds; optional fields must be present in both or neither.
PointCloud append_points(const PointCloud& a, const PointCloud& b);

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace catdet
