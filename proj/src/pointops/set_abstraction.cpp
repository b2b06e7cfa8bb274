#include "catdet/pointops/set_abstraction.hpp"

#include <algorithm>
#include <limits>

#include "catdet/errors.hpp"
#include "catdet/pointops/sampling.hpp"

namespace catdet::pointops {

PointCloud set_abstraction(const PointCloud& pc, const SetAbstractionSpec& spec, const num::MlpParams& mlp) {
  pc.validate();
  const std::size_t width = pc.feature_width();
  if (mlp.in_dim() != 3 + width) {
    throw ShapeError("set_abstraction: mlp expects " + std::to_string(mlp.in_dim()) + " inputs, got 3 + " +
                     std::to_string(width));
  }
  const auto centroids = farthest_point_sample(pc, spec.centroids, spec.start);
  const auto groups = ball_query(pc, centroids, spec.radius, spec.neighbors);

  const std::size_t out_width = mlp.out_dim();
  Tensor features({centroids.size(), out_width});
  Tensor group_input({spec.neighbors, 3 + width});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto center = pc.coords.row(groups[g].centroid_index);
    for (std::size_t j = 0; j < spec.neighbors; ++j) {
      const std::size_t member = groups[g].member_indices[j];
      auto row = group_input.row(j);
      const auto p = pc.coords.row(member);
      for (int a = 0; a < 3; ++a) row[a] = p[a] - center[a];
      if (width > 0) {
        auto f = pc.features->row(member);
        std::copy(f.begin(), f.end(), row.begin() + 3);
      }
    }
    const Tensor transformed = num::mlp_forward(mlp, group_input);
    auto pooled = features.row(g);
    std::fill(pooled.begin(), pooled.end(), -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < spec.neighbors; ++j) {
      auto r = transformed.row(j);
      for (std::size_t c = 0; c < out_width; ++c) pooled[c] = std::max(pooled[c], r[c]);
    }
  }
  PointCloud out;
  out.coords = gather_rows(pc.coords, centroids);
  out.features = std::move(features);
  return out;
}

}  // namespace catdet::pointops
