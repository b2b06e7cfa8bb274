#pragma once

#include "catdet/pointops/point_cloud.hpp"

namespace catdet::pointops {

/// Squared distances below this count as coincident points.
inline constexpr double kCoincidentEpsilon = 1e-10;

/// Inverse-squared-distance interpolation from the 3 nearest sources (fewer when
/// the source has fewer points). A destination that coincides with a source
/// copies that source's feature row exactly.
Tensor feature_propagation(const Tensor& src_coords, const Tensor& src_features, const Tensor& dst_coords);
Tensor feature_propagation(const PointCloud& src, const Tensor& dst_coords);

}  // namespace catdet::pointops
