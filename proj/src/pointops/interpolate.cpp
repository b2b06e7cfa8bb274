#include "catdet/pointops/interpolate.hpp"

#include <array>
#include <limits>

#include "catdet/errors.hpp"

namespace catdet::pointops {

Tensor feature_propagation(const Tensor& src_coords, const Tensor& src_features, const Tensor& dst_coords) {
  if (src_coords.empty() || src_coords.rank() != 2 || src_coords.dim(1) != 3) {
    throw ShapeError("feature_propagation: source coords must be non-empty [N,3]");
  }
  if (src_features.empty()) throw ArgumentError("feature_propagation: source features are missing");
  if (src_features.rank() != 2 || src_features.dim(0) != src_coords.dim(0)) {
    throw ShapeError("feature_propagation: source features do not align with source coords");
  }
  if (dst_coords.rank() != 2 || dst_coords.dim(1) != 3) throw ShapeError("feature_propagation: dst must be [M,3]");

  const std::size_t n = src_coords.dim(0), m = dst_coords.dim(0), width = src_features.dim(1);
  const std::size_t k = std::min<std::size_t>(3, n);
  Tensor out({m, width});
  for (std::size_t d = 0; d < m; ++d) {
    const auto target = dst_coords.row(d);
    // Sorted k-best list; strict < keeps the lowest index on distance ties.
    std::array<double, 3> best_d{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                                 std::numeric_limits<double>::infinity()};
    std::array<std::size_t, 3> best_i{n, n, n};
    for (std::size_t s = 0; s < n; ++s) {
      const double dist = squared_distance(src_coords.row(s), target);
      if (dist >= best_d[k - 1]) continue;
      std::size_t pos = k - 1;
      while (pos > 0 && dist < best_d[pos - 1]) {
        best_d[pos] = best_d[pos - 1];
        best_i[pos] = best_i[pos - 1];
        --pos;
      }
      best_d[pos] = dist;
      best_i[pos] = s;
    }
    auto dst_row = out.row(d);
    if (best_d[0] < kCoincidentEpsilon) {
      auto src = src_features.row(best_i[0]);
      std::copy(src.begin(), src.end(), dst_row.begin());
      continue;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += 1.0 / best_d[j];
    for (std::size_t j = 0; j < k; ++j) {
      const double w = (1.0 / best_d[j]) / total;
      auto src = src_features.row(best_i[j]);
      for (std::size_t c = 0; c < width; ++c) dst_row[c] += w * src[c];
    }
  }
  out.check_finite("feature_propagation");
  return out;
}

Tensor feature_propagation(const PointCloud& src, const Tensor& dst_coords) {
  if (!src.features) throw ArgumentError("feature_propagation: source features are missing");
  return feature_propagation(src.coords, *src.features, dst_coords);
}

}  // namespace catdet::pointops
