#include "catdet/pointops/point_cloud.hpp"

#include "catdet/errors.hpp"

namespace catdet {

void PointCloud::validate() const {
  if (coords.empty() || coords.rank() != 2 || coords.dim(1) != 3) {
    throw ShapeError("point cloud coords must be a non-empty [N,3] tensor");
  }
  const std::size_t n = coords.dim(0);
  coords.check_finite("point cloud coords");
  if (features && (features->rank() != 2 || features->dim(0) != n)) {
    throw ShapeError("point features " + features->shape_string() + " do not align with " + std::to_string(n) + " points");
  }
  if (fg_score) {
    if (fg_score->size() != n) throw ShapeError("fg_score length does not match point count");
    for (double s : *fg_score) {
      if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("fg_score values must lie in [0,1]");
    }
  }
  if (class_id && class_id->size() != n) throw ShapeError("class_id length does not match point count");
}

PointCloud select_points(const PointCloud& pc, std::span<const std::size_t> indices) {
  PointCloud out;
  out.coords = gather_rows(pc.coords, indices);
  if (pc.features) out.features = gather_rows(*pc.features, indices);
  if (pc.fg_score) {
    std::vector<double> s;
    s.reserve(indices.size());
    for (std::size_t i : indices) s.push_back((*pc.fg_score)[i]);
    out.fg_score = std::move(s);
  }
  if (pc.class_id) {
    std::vector<int> c;
    c.reserve(indices.size());
    for (std::size_t i : indices) c.push_back((*pc.class_id)[i]);
    out.class_id = std::move(c);
  }
  return out;
}

PointCloud append_points(const PointCloud& a, const PointCloud& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.features.has_value() != b.features.has_value() || a.fg_score.has_value() != b.fg_score.has_value() ||
      a.class_id.has_value() != b.class_id.has_value()) {
    throw ArgumentError("append_points: optional fields differ between clouds");
  }
  PointCloud out;
  out.coords = concat_rows(a.coords, b.coords);
  if (a.features) out.features = concat_rows(*a.features, *b.features);
  if (a.fg_score) {
    auto s = *a.fg_score;
    s.insert(s.end(), b.fg_score->begin(), b.fg_score->end());
    out.fg_score = std::move(s);
  }
  if (a.class_id) {
    auto c = *a.class_id;
    c.insert(c.end(), b.class_id->begin(), b.class_id->end());
    out.class_id = std::move(c);
  }
  return out;
}

}  // namespace catdet
