#include "catdet/evalkit/iou.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catdet/errors.hpp"

namespace catdet::eval {
namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Intersection of segment p->q with the infinite line through a->b.
Point2 intersect(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  const double cp = cross(a, b, p);
  const double cq = cross(a, b, q);
  const double t = cp / (cp - cq);
  return {p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
}

std::vector<Point2> corners_of(const Box3D& b) {
  const auto c = b.bev_corners();
  return {c.begin(), c.end()};
}

bool degenerate(const Box3D& b) { return !(b.w > 0.0 && b.l > 0.0); }

}  // namespace

double polygon_area(const std::vector<Point2>& poly) {
  double s = 0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % n];
    s += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * s;
}

std::vector<Point2> clip_polygon(const std::vector<Point2>& subject, const std::vector<Point2>& clip) {
  std::vector<Point2> out = subject;
  for (std::size_t e = 0, m = clip.size(); e < m && !out.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % m];
    const std::vector<Point2> in = std::move(out);
    out.clear();
    for (std::size_t i = 0, n = in.size(); i < n; ++i) {
      const Point2& prev = in[(i + n - 1) % n];
      const Point2& cur = in[i];
      const bool cur_in = cross(a, b, cur) >= 0.0;
      const bool prev_in = cross(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) out.push_back(intersect(prev, cur, a, b));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(intersect(prev, cur, a, b));
      }
    }
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  if (degenerate(a) || degenerate(b)) return 0.0;
  const std::vector<Point2> poly = clip_polygon(corners_of(a), corners_of(b));
  if (poly.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(poly));
}

double bev_iou(const Box3D& a, const Box3D& b) {
  if (degenerate(a) || degenerate(b)) return 0.0;
  const double inter = bev_intersection_area(a, b);
  const double uni = a.bev_area() + b.bev_area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
  if (degenerate(a) || degenerate(b) || !(a.h > 0.0 && b.h > 0.0)) return 0.0;
  const double top = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  const double bottom = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  const double dz = top - bottom;
  if (dz <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * dz;
  const double uni = a.volume() + b.volume() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

std::vector<std::size_t> nms_bev(const std::vector<Box3D>& boxes, double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw ArgumentError("nms_bev: threshold must be in [0, 1]");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return boxes[i].score > boxes[j].score; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](std::size_t k) { return bev_iou(boxes[k], boxes[i]) > iou_threshold; });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

}  // namespace catdet::eval
