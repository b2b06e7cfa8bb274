#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "catdet/errors.hpp"
#include "catdet/evalkit/iou.hpp"
#include "catdet/kitti/scene.hpp"

namespace catdet::kitti {
namespace {

constexpr std::size_t kMaxAttempts = 1000;
constexpr double kSurfaceScale = 0.98;
constexpr double kMinCornerDepth = 0.5;

const std::array<std::array<double, 3>, kNumClasses> kMeanSize{{{1.53, 1.63, 3.88}, {1.76, 0.66, 0.84},
                                                                {1.74, 0.60, 1.76}}};  // h, w, l
const std::array<std::array<double, 3>, kNumClasses> kColour{{{0.85, 0.2, 0.2}, {0.2, 0.8, 0.25},
                                                              {0.2, 0.3, 0.9}}};

using Pixel = std::array<double, 2>;

std::vector<Pixel> convex_hull(std::vector<Pixel> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  const auto cross = [](const Pixel& o, const Pixel& a, const Pixel& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<Pixel> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Pixel& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Surface point of the unit box [-0.5, 0.5]^3 scaled by (l, w, h), faces weighted by area.
std::array<double, 3> surface_point(const Box3D& b, std::mt19937_64& rng) {
  const double areas[3] = {b.w * b.h, b.l * b.h, b.l * b.w};  // faces normal to x, y, z
  std::discrete_distribution<int> face({areas[0], areas[0], areas[1], areas[1], areas[2], areas[2]});
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const int f = face(rng);
  std::array<double, 3> q{u(rng), u(rng), u(rng)};
  q[static_cast<std::size_t>(f / 2)] = f % 2 == 0 ? -0.5 : 0.5;
  return {q[0] * b.l * kSurfaceScale, q[1] * b.w * kSurfaceScale, q[2] * b.h * kSurfaceScale};
}

bool silhouette_inside(const std::vector<Pixel>& hull, std::size_t w, std::size_t h) {
  if (hull.size() < 3) return false;
  return std::all_of(hull.begin(), hull.end(), [&](const Pixel& p) {
    return p[0] >= 0.0 && p[1] >= 0.0 && p[0] < static_cast<double>(w) && p[1] < static_cast<double>(h);
  });
}

// Paints every pixel whose square overlaps the hull.
void paint(Tensor& image, const std::vector<Pixel>& hull, const std::array<double, 3>& colour) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  double umin = hull[0][0], umax = umin, vmin = hull[0][1], vmax = vmin;
  for (const Pixel& p : hull) {
    umin = std::min(umin, p[0]);
    umax = std::max(umax, p[0]);
    vmin = std::min(vmin, p[1]);
    vmax = std::max(vmax, p[1]);
  }
  const auto c0 = static_cast<std::size_t>(std::max(0.0, std::floor(umin)));
  const auto c1 = std::min(w - 1, static_cast<std::size_t>(std::max(0.0, std::floor(umax))));
  const auto r0 = static_cast<std::size_t>(std::max(0.0, std::floor(vmin)));
  const auto r1 = std::min(h - 1, static_cast<std::size_t>(std::max(0.0, std::floor(vmax))));
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      const double x = static_cast<double>(c), y = static_cast<double>(r);
      const std::vector<eval::Point2> square{{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}};
      const auto clipped = eval::clip_polygon(square, hull);
      if (clipped.size() >= 3 && eval::polygon_area(clipped) > 0.0) {
        for (std::size_t ch = 0; ch < 3; ++ch) image(ch, r, c) = colour[ch];
      }
    }
  }
}

}  // namespace

void SyntheticSceneSpec::validate() const {
  if (!(x_range[0] < x_range[1]) || !(y_range[0] < y_range[1])) throw ArgumentError("synthetic: empty placement region");
  if (!(x_range[0] > 0.0 && x_range[1] < 70.4 && y_range[0] > -40.0 && y_range[1] < 40.0)) {
    throw ArgumentError("synthetic: placement region must lie inside the point-cloud range");
  }
  if (!(ground_z > -3.0 && ground_z < 1.0)) throw ArgumentError("synthetic: ground height outside the range");
  if (points_per_object == 0 && (counts[0] + counts[1] + counts[2]) > 0) {
    throw ArgumentError("synthetic: objects need at least one point");
  }
  if (image_width < 8 || image_height < 8) throw ArgumentError("synthetic: image too small");
  if (!(ground_density >= 0.0) || !(margin >= 0.0)) throw ArgumentError("synthetic: negative density or margin");
}

fusion::Calibration synthetic_calibration(std::size_t image_width, std::size_t image_height) {
  const double f = 0.56 * static_cast<double>(image_width);
  const double cx = 0.5 * static_cast<double>(image_width), cy = 0.5 * static_cast<double>(image_height);
  fusion::Calibration c;
  c.c_rect = Tensor::matrix({{f, 0, cx, 0}, {0, f, cy, 0}, {0, 0, 1, 0}});
  c.r_rect = Tensor::matrix({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  c.t_cam_from_lidar = Tensor::matrix({{0, -1, 0, 0}, {0, 0, -1, -0.08}, {1, 0, 0, -0.27}, {0, 0, 0, 1}});
  return c;
}

std::vector<std::array<double, 2>> projected_silhouette(const Box3D& box, const fusion::Calibration& calib) {
  std::vector<Pixel> pts;
  for (const auto& corner : box.corners()) {
    const fusion::Projection p = fusion::project_lidar_to_image(calib, corner);
    if (p.depth < kMinCornerDepth) return {};
    pts.push_back({p.u, p.v});
  }
  return convex_hull(std::move(pts));
}

bool point_in_convex(const std::vector<std::array<double, 2>>& hull, double u, double v) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0, n = hull.size(); i < n; ++i) {
    const Pixel& a = hull[i];
    const Pixel& b = hull[(i + 1) % n];
    if ((b[0] - a[0]) * (v - a[1]) - (b[1] - a[1]) * (u - a[0]) < 0.0) return false;
  }
  return true;
}

Frame generate_synthetic(const SyntheticSceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> ux(spec.x_range[0], spec.x_range[1]);
  std::uniform_real_distribution<double> uy(spec.y_range[0], spec.y_range[1]);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);

  Frame frame;
  frame.calib = synthetic_calibration(spec.image_width, spec.image_height);

  std::vector<Box3D> boxes;
  std::vector<std::vector<Pixel>> hulls;
  for (int cls = 0; cls < kNumClasses; ++cls) {
    for (std::size_t k = 0; k < spec.counts[static_cast<std::size_t>(cls)]; ++k) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
        const auto& mean = kMeanSize[static_cast<std::size_t>(cls)];
        Box3D b;
        b.h = mean[0] * jitter(rng);
        b.w = mean[1] * jitter(rng);
        b.l = mean[2] * jitter(rng);
        b.x = ux(rng);
        b.y = uy(rng);
        b.z = spec.ground_z + 0.5 * b.h;
        b.theta = normalize_angle(heading(rng));
        b.class_id = cls;
        Box3D grown = b;
        grown.w += 2 * spec.margin;
        grown.l += 2 * spec.margin;
        if (std::any_of(boxes.begin(), boxes.end(), [&](const Box3D& o) { return eval::bev_iou(grown, o) > 0.0; })) {
          continue;
        }
        auto hull = projected_silhouette(b, frame.calib);
        if (!silhouette_inside(hull, spec.image_width, spec.image_height)) continue;
        boxes.push_back(b);
        hulls.push_back(std::move(hull));
        placed = true;
      }
      if (!placed) {
        throw GeometryError("synthetic: could not place a " + std::string(class_name(cls)) + " after " +
                            std::to_string(kMaxAttempts) + " attempts");
      }
    }
  }

  std::vector<double> xyz, intensity;
  std::vector<int> labels;
  std::uniform_real_distribution<double> obj_intensity(0.5, 1.0), ground_intensity(0.0, 0.3);
  for (const Box3D& b : boxes) {
    for (std::size_t i = 0; i < spec.points_per_object; ++i) {
      const auto w = b.to_world(surface_point(b, rng));
      xyz.insert(xyz.end(), w.begin(), w.end());
      intensity.push_back(obj_intensity(rng));
      labels.push_back(b.class_id);
    }
  }
  const double area = (spec.x_range[1] - spec.x_range[0]) * (spec.y_range[1] - spec.y_range[0]);
  const auto ground = static_cast<std::size_t>(std::llround(area * spec.ground_density));
  std::uniform_real_distribution<double> dz(-0.02, 0.02);
  for (std::size_t i = 0; i < ground; ++i) {
    const std::array<double, 3> p{ux(rng), uy(rng), spec.ground_z + dz(rng)};
    const bool under = std::any_of(boxes.begin(), boxes.end(), [&](const Box3D& b) {
      const auto q = b.to_local(p);
      return std::abs(q[0]) <= 0.5 * b.l + 0.05 && std::abs(q[1]) <= 0.5 * b.w + 0.05;
    });
    if (under) continue;
    xyz.insert(xyz.end(), p.begin(), p.end());
    intensity.push_back(ground_intensity(rng));
    labels.push_back(kBackground);
  }
  if (labels.empty()) throw ArgumentError("synthetic: the scene has no points");
  const std::size_t n = labels.size();
  frame.cloud.coords = Tensor({n, 3}, std::move(xyz));
  frame.cloud.features = Tensor({n, 1}, std::move(intensity));
  frame.cloud.class_id = std::move(labels);

  frame.image = Tensor({3, spec.image_height, spec.image_width});
  std::uniform_real_distribution<double> noise(0.15, 0.35);
  for (double& v : frame.image.storage()) v = noise(rng);
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::hypot(boxes[a].x, boxes[a].y) > std::hypot(boxes[b].x, boxes[b].y);
  });
  for (std::size_t i : order) paint(frame.image, hulls[i], kColour[static_cast<std::size_t>(boxes[i].class_id)]);

  for (std::size_t i = 0; i < boxes.size(); ++i) {
    Label l = label_from_box(boxes[i], frame.calib);
    double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
    for (const Pixel& p : hulls[i]) {
      umin = std::min(umin, p[0]);
      umax = std::max(umax, p[0]);
      vmin = std::min(vmin, p[1]);
      vmax = std::max(vmax, p[1]);
    }
    l.bbox = {umin, vmin, umax, vmax};
    frame.labels.push_back(std::move(l));
  }
  return frame;
}

}  // namespace catdet::kitti
