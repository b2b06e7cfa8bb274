#pragma once

#include <cstddef>

#include "catdet/numerics/ops.hpp"
#include "catdet/pointops/point_cloud.hpp"

namespace catdet::pointops {

struct SetAbstractionSpec {
  std::size_t centroids = 1;
  double radius = 1.0;
  std::size_t neighbors = 16;
  std::size_t start = 0;
};

/// FPS, ball query, per-member MLP over (offset to centroid || member feature),
/// then channel-wise max over each group. The MLP input width is 3 + C.
PointCloud set_abstraction(const PointCloud& pc, const SetAbstractionSpec& spec, const num::MlpParams& mlp);

}  // namespace catdet::pointops
