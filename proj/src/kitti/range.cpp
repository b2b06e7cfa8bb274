#include <algorithm>
#include <numeric>
#include <random>

#include "catdet/errors.hpp"
#include "catdet/kitti/scene.hpp"

namespace catdet::kitti {

PointCloud crop_range(const PointCloud& pc, std::uint64_t seed, const RangeConfig& cfg) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto p = pc.point(i);
    if (p[0] > cfg.x[0] && p[0] < cfg.x[1] && p[1] > cfg.y[0] && p[1] < cfg.y[1] && p[2] > cfg.z[0] &&
        p[2] < cfg.z[1]) {
      keep.push_back(i);
    }
  }
  if (keep.empty()) throw ArgumentError("crop_range: no points inside the range");
  if (keep.size() > cfg.max_points) {
    std::mt19937_64 rng(seed);
    std::shuffle(keep.begin(), keep.end(), rng);
    keep.resize(cfg.max_points);
    std::sort(keep.begin(), keep.end());
  }
  return select_points(pc, keep);
}

std::vector<std::size_t> resample_indices(std::size_t size, std::size_t n, std::uint64_t seed) {
  if (size == 0 || n == 0) throw ArgumentError("resample_to: need a non-empty cloud and target");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  if (size >= n) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, size - 1);
    while (idx.size() < n) idx.push_back(pick(rng));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

PointCloud resample_to(const PointCloud& pc, std::size_t n, std::uint64_t seed) {
  return select_points(pc, resample_indices(pc.size(), n, seed));
}

void label_points(PointCloud& pc, const std::vector<Box3D>& boxes) {
  std::vector<int> labels(pc.size(), kBackground);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const auto p = pc.point(i);
    for (const Box3D& b : boxes) {
      if (b.contains(p)) {
        labels[i] = b.class_id;
        break;
      }
    }
  }
  pc.class_id = std::move(labels);
}

}  // namespace catdet::kitti
