#include "catdet/pointops/sampling.hpp"

#include <limits>

#include "catdet/errors.hpp"

namespace catdet::pointops {
namespace {

void check_coords(const Tensor& coords) {
  if (coords.empty() || coords.rank() != 2 || coords.dim(1) != 3) {
    throw ShapeError("expected non-empty [N,3] coordinates");
  }
}

}  // namespace

std::vector<std::size_t> farthest_point_sample(const Tensor& coords, std::size_t count, std::size_t start) {
  check_coords(coords);
  const std::size_t n = coords.dim(0);
  if (count < 1 || count > n) {
    throw ArgumentError("farthest_point_sample: cannot pick " + std::to_string(count) + " of " + std::to_string(n) + " points");
  }
  if (start >= n) throw ArgumentError("farthest_point_sample: start index out of range");

  // Chosen points are marked with -1 so duplicates of a chosen point still win over them.
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::size_t current = start;
  for (std::size_t step = 0; step < count; ++step) {
    picked.push_back(current);
    min_dist[current] = -1.0;
    if (step + 1 == count) break;
    const auto c = coords.row(current);
    std::size_t best = n;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_dist[i] < 0.0) continue;
      const double d = squared_distance(coords.row(i), c);
      if (d < min_dist[i]) min_dist[i] = d;
      if (min_dist[i] > best_dist) {
        best_dist = min_dist[i];
        best = i;
      }
    }
    current = best;
  }
  return picked;
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& pc, std::size_t count, std::size_t start) {
  return farthest_point_sample(pc.coords, count, start);
}

std::vector<BallGroup> ball_query(const Tensor& coords, std::span<const std::size_t> centroids, double radius,
                                  std::size_t k) {
  check_coords(coords);
  if (!(radius > 0.0)) throw ArgumentError("ball_query: radius must be positive");
  if (k < 1) throw ArgumentError("ball_query: k must be at least 1");
  const std::size_t n = coords.dim(0);
  const double r2 = radius * radius;
  std::vector<BallGroup> groups;
  groups.reserve(centroids.size());
  for (std::size_t c : centroids) {
    if (c >= n) throw ArgumentError("ball_query: centroid index out of range");
    BallGroup g;
    g.centroid_index = c;
    g.member_indices.reserve(k);
    const auto center = coords.row(c);
    for (std::size_t i = 0; i < n && g.member_indices.size() < k; ++i) {
      if (squared_distance(coords.row(i), center) <= r2) g.member_indices.push_back(i);
    }
    // The centroid itself always qualifies, so the group is never empty here.
    const std::size_t first = g.member_indices.front();
    g.member_indices.resize(k, first);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<BallGroup> ball_query(const PointCloud& pc, std::span<const std::size_t> centroids, double radius,
                                  std::size_t k) {
  return ball_query(pc.coords, centroids, radius, k);
}

}  // namespace catdet::pointops
