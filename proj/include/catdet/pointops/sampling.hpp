#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "catdet/pointops/point_cloud.hpp"

namespace catdet::pointops {

/// Greedy max-min subsampling. Each pick maximises the distance to the already
/// chosen set; ties go to the lowest index.
std::vector<std::size_t> farthest_point_sample(const Tensor& coords, std::size_t count,
                                               std::size_t start = 0);
std::vector<std::size_t> farthest_point_sample(const PointCloud& pc, std::size_t count,
                                               std::size_t start = 0);

struct BallGroup {
  std::size_t centroid_index = 0;
  std::vector<std::size_t> member_indices;  // exactly k entries
};

/// The first k points (by index) within `radius` of each centroid. Short groups
/// are padded by repeating their first member.
std::vector<BallGroup> ball_query(const Tensor& coords, std::span<const std::size_t> centroids,
                                  double radius, std::size_t k);
std::vector<BallGroup> ball_query(const PointCloud& pc, std::span<const std::size_t> centroids,
                                  double radius, std::size_t k);

}  // namespace catdet::pointops
