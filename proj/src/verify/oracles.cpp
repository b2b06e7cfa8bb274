#include "catdet/verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "catdet/detection/bin_codec.hpp"
#include "catdet/errors.hpp"
#include "catdet/evalkit/iou.hpp"
#include "catdet/pointops/sampling.hpp"

namespace catdet::verify {

namespace {

using num::Rng;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double dist2(const Tensor& c, std::size_t i, std::size_t j) {
  double s = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double d = c(i, k) - c(j, k);
    s += d * d;
  }
  return s;
}

Tensor random_coords(Rng& rng, std::size_t n) {
  Tensor t({n, 3});
  for (double& v : t.storage()) v = uniform(rng, -5, 5);
  return t;
}

bool inside_bev(const Box3D& b, double px, double py) {
  const double dx = px - b.x, dy = py - b.y;
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double along = dx * c + dy * s, across = -dx * s + dy * c;
  return std::abs(along) <= b.l / 2 && std::abs(across) <= b.w / 2;
}

std::array<double, 4> bev_extent(const Box3D& b) {
  // Half extents of the rotated rectangle along the world axes.
  const double c = std::abs(std::cos(b.theta)), s = std::abs(std::sin(b.theta));
  const double ex = c * b.l / 2 + s * b.w / 2, ey = s * b.l / 2 + c * b.w / 2;
  return {b.x - ex, b.x + ex, b.y - ey, b.y + ey};
}

double vertical_overlap(const Box3D& a, const Box3D& b) {
  const double lo = std::max(a.z - a.h / 2, b.z - b.h / 2), hi = std::min(a.z + a.h / 2, b.z + b.h / 2);
  return std::max(0.0, hi - lo);
}

Box3D random_rotated_box(Rng& rng, double cx, double cy) {
  Box3D b;
  b.x = cx;
  b.y = cy;
  b.z = uniform(rng, -1.0, 0.0);
  b.l = uniform(rng, 1.0, 5.0);
  b.w = uniform(rng, 0.5, 2.5);
  b.h = uniform(rng, 1.0, 2.0);
  b.theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return b;
}

std::vector<double> apply(const Tensor& m, const std::vector<double>& v) {
  std::vector<double> out(m.dim(0), 0.0);
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t j = 0; j < m.dim(1); ++j) out[i] += m(i, j) * v[j];
  }
  return out;
}

Tensor rotation(double yaw, double pitch, double roll) {
  const double cy = std::cos(yaw), sy = std::sin(yaw), cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  // Rz(yaw) Ry(pitch) Rx(roll)
  return Tensor::matrix({{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr},
                         {sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr},
                         {-sp, cp * sr, cp * cr}});
}

Tensor homogeneous(const Tensor& r, const std::array<double, 3>& t) {
  Tensor m({4, 4});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) m(i, j) = r(i, j);
    m(i, 3) = t[i];
  }
  m(3, 3) = 1;
  return m;
}

// A KITTI-like rig: LiDAR x forward maps to camera z, with random perturbations.
fusion::Calibration random_calibration(Rng& rng) {
  const Tensor base = Tensor::matrix({{0, -1, 0}, {0, 0, -1}, {1, 0, 0}});
  const Tensor jitter = rotation(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05));
  Tensor r({3, 3});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 3; ++k) r(i, j) += jitter(i, k) * base(k, j);
    }
  }
  fusion::Calibration c;
  c.t_cam_from_lidar = homogeneous(r, {uniform(rng, -0.1, 0.1), uniform(rng, -0.2, 0.0), uniform(rng, -0.4, 0.0)});
  c.r_rect = homogeneous(rotation(uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01)),
                         {0, 0, 0});
  const double f = uniform(rng, 500, 900);
  c.c_rect = Tensor::matrix({{f, 0, uniform(rng, 500, 700), f * uniform(rng, -0.1, 0.1)},
                             {0, f, uniform(rng, 150, 200), uniform(rng, -1, 1)},
                             {0, 0, 1, uniform(rng, -0.01, 0.01)}});
  return c;
}

Box3D labelled(Box3D b, int cls, double score = 1.0) {
  b.class_id = cls;
  b.score = score;
  return b;
}

Box3D at(double x, double y, int cls, double score = 1.0) {
  Box3D b;
  b.x = x;
  b.y = y;
  b.z = -1.0;
  if (cls == kCar) {
    b.h = 1.5, b.w = 1.6, b.l = 3.9;
  } else if (cls == kPedestrian) {
    b.h = 1.75, b.w = 0.65, b.l = 0.85;
  } else {
    b.h = 1.75, b.w = 0.6, b.l = 1.76;
  }
  return labelled(b, cls, score);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::size_t> fps_reference(const Tensor& coords, std::size_t count, std::size_t start) {
  const std::size_t n = coords.dim(0);
  std::vector<std::size_t> chosen{start};
  std::vector<bool> taken(n, false);
  taken[start] = true;
  while (chosen.size() < count) {
    std::size_t best = n;
    double best_d = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (taken[j]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) d = std::min(d, dist2(coords, j, c));
      if (d > best_d) {
        best_d = d;
        best = j;
      }
    }
    chosen.push_back(best);
    taken[best] = true;
  }
  return chosen;
}

std::vector<std::size_t> ball_reference(const Tensor& coords, std::size_t centroid, double radius) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < coords.dim(0); ++j) {
    if (dist2(coords, j, centroid) <= radius * radius) out.push_back(j);
  }
  return out;
}

double monte_carlo_bev_intersection(const Box3D& a, const Box3D& b, std::size_t grid, Rng& rng) {
  const auto ea = bev_extent(a), eb = bev_extent(b);
  const double x0 = std::min(ea[0], eb[0]), x1 = std::max(ea[1], eb[1]);
  const double y0 = std::min(ea[2], eb[2]), y1 = std::max(ea[3], eb[3]);
  const double dx = (x1 - x0) / static_cast<double>(grid), dy = (y1 - y0) / static_cast<double>(grid);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      const double px = x0 + (static_cast<double>(i) + u(rng)) * dx;
      const double py = y0 + (static_cast<double>(j) + u(rng)) * dy;
      if (inside_bev(a, px, py) && inside_bev(b, px, py)) ++hits;
    }
  }
  return static_cast<double>(hits) * dx * dy;
}

double monte_carlo_bev_iou(const Box3D& a, const Box3D& b, std::size_t grid, Rng& rng) {
  const double inter = monte_carlo_bev_intersection(a, b, grid, rng);
  return inter / (a.l * a.w + b.l * b.w - inter);
}

double monte_carlo_iou_3d(const Box3D& a, const Box3D& b, std::size_t grid, Rng& rng) {
  const double inter = monte_carlo_bev_intersection(a, b, grid, rng) * vertical_overlap(a, b);
  return inter / (a.l * a.w * a.h + b.l * b.w * b.h - inter);
}

std::array<double, 3> projection_reference(const fusion::Calibration& calib, const std::array<double, 3>& p) {
  const auto cam = apply(calib.t_cam_from_lidar, {p[0], p[1], p[2], 1.0});
  const auto rect = apply(calib.r_rect, cam);
  const auto img = apply(calib.c_rect, rect);
  return {img[0] / img[2], img[1] / img[2], img[2]};
}

std::vector<ApCase> constructed_ap_cases() {
  std::vector<ApCase> cases;
  {
    // Ranked TP, FP, TP against three cars: precision 1, 1/2, 2/3 at recall 1/3, 1/3, 2/3.
    ApCase c;
    c.name = "tp-fp-tp";
    c.class_id = kCar;
    c.ground_truth = {{at(10, 0, kCar), at(20, 5, kCar), at(30, -5, kCar)}};
    c.detections = {{at(10, 0, kCar, 0.9), at(40, 10, kCar, 0.8), at(20, 5, kCar, 0.7)}};
    c.ap11 = 100.0 * (4 * 1.0 + 3 * (2.0 / 3.0)) / 11.0;
    c.ap40 = 100.0 * (13 * 1.0 + 13 * (2.0 / 3.0)) / 40.0;
    cases.push_back(c);
  }
  {
    // Two frames, four pedestrians. Ranked TP, TP, FP (duplicate), FP, TP:
    // precision 1, 1, 2/3, 1/2, 3/5 at recall 1/4, 1/2, 1/2, 1/2, 3/4.
    ApCase c;
    c.name = "duplicate-two-frames";
    c.class_id = kPedestrian;
    c.ground_truth = {{at(10, 0, kPedestrian), at(15, 3, kPedestrian)},
                      {at(12, -2, kPedestrian), at(18, 4, kPedestrian)}};
    c.detections = {{at(10, 0, kPedestrian, 0.9), at(25, -6, kPedestrian, 0.6)},
                    {at(12, -2, kPedestrian, 0.8), at(12, -2, kPedestrian, 0.7), at(18, 4, kPedestrian, 0.5)}};
    c.ap11 = 100.0 * (6 * 1.0 + 2 * 0.6) / 11.0;
    c.ap40 = 100.0 * (20 * 1.0 + 10 * 0.6) / 40.0;
    cases.push_back(c);
  }
  {
    // The top cyclist is shifted 0.8 m along its length (IoU 0.375, below 0.5);
    // a car box on the same spot is ignored. Ranked FP, TP, TP over two cyclists.
    ApCase c;
    c.name = "low-overlap-and-other-class";
    c.class_id = kCyclist;
    c.ground_truth = {{at(10, 0, kCyclist), at(20, 2, kCyclist)}};
    c.detections = {{at(10.8, 0, kCyclist, 0.9), at(10, 0, kCar, 0.95), at(10, 0, kCyclist, 0.8),
                     at(20, 2, kCyclist, 0.3)}};
    c.ap11 = 100.0 * 2.0 / 3.0;
    c.ap40 = 100.0 * 2.0 / 3.0;
    cases.push_back(c);
  }
  return cases;
}

CheckResult check_fps(std::size_t seeds, std::size_t max_points) {
  CheckResult r{"fps", true, ""};
  for (std::size_t s = 0; s < seeds && r.passed; ++s) {
    Rng rng(s);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, max_points)(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const Tensor coords = random_coords(rng, n);
    if (pointops::farthest_point_sample(coords, m, start) != fps_reference(coords, m, start)) {
      r.passed = false;
      r.detail = "index mismatch at seed " + std::to_string(s);
    }
  }
  if (r.passed) r.detail = std::to_string(seeds) + " clouds, exact index match";
  return r;
}

CheckResult check_ball_query(std::size_t seeds, std::size_t max_points) {
  CheckResult r{"ball_query", true, ""};
  std::size_t groups = 0;
  for (std::size_t s = 0; s < seeds && r.passed; ++s) {
    Rng rng(1000 + s);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, max_points)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    const double radius = uniform(rng, 0.5, 4.0);
    const Tensor coords = random_coords(rng, n);
    std::vector<std::size_t> centroids;
    for (std::size_t i = 0; i < n; i += 3) centroids.push_back(i);
    const auto got = pointops::ball_query(coords, centroids, radius, k);
    for (std::size_t g = 0; g < centroids.size(); ++g) {
      const auto within = ball_reference(coords, centroids[g], radius);
      std::vector<std::size_t> want(within.begin(), within.begin() + static_cast<std::ptrdiff_t>(std::min(k, within.size())));
      while (want.size() < k) want.push_back(want.front());
      if (got[g].centroid_index != centroids[g] || got[g].member_indices != want) {
        r.passed = false;
        r.detail = "membership mismatch at seed " + std::to_string(s) + ", centroid " + std::to_string(centroids[g]);
        break;
      }
      ++groups;
    }
  }
  if (r.passed) r.detail = std::to_string(groups) + " groups match the exhaustive scan";
  return r;
}

CheckResult check_rotated_iou(std::size_t pairs, std::uint64_t seed, std::size_t grid, double tolerance) {
  CheckResult r{"rotated_iou", true, ""};
  Rng rng(seed);
  double worst = 0;
  std::size_t overlapping = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Box3D a = random_rotated_box(rng, uniform(rng, -10, 10), uniform(rng, -10, 10));
    const Box3D b = random_rotated_box(rng, a.x + uniform(rng, -1.5, 1.5), a.y + uniform(rng, -1.5, 1.5));
    if (eval::iou_3d(a, b) > 0) ++overlapping;
    worst = std::max(worst, std::abs(eval::bev_iou(a, b) - monte_carlo_bev_iou(a, b, grid, rng)));
    worst = std::max(worst, std::abs(eval::iou_3d(a, b) - monte_carlo_iou_3d(a, b, grid, rng)));
  }
  r.passed = worst < tolerance;
  r.detail = std::to_string(pairs) + " pairs (" + std::to_string(overlapping) + " overlapping), max |delta| " + fmt(worst);
  return r;
}

CheckResult check_projection(std::size_t trials, std::uint64_t seed, double tolerance) {
  CheckResult r{"projection", true, ""};
  Rng rng(seed);
  double worst = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto calib = random_calibration(rng);
    const std::array<double, 3> p{uniform(rng, 3, 60), uniform(rng, -20, 20), uniform(rng, -2, 2)};
    const auto want = projection_reference(calib, p);
    const auto got = fusion::project_lidar_to_image(calib, p);
    worst = std::max({worst, std::abs(got.u - want[0]) / std::max(1.0, std::abs(want[0])),
                      std::abs(got.v - want[1]) / std::max(1.0, std::abs(want[1])),
                      std::abs(got.depth - want[2]) / std::max(1.0, std::abs(want[2]))});
  }
  r.passed = worst < tolerance;
  r.detail = std::to_string(trials) + " points, max scaled error " + fmt(worst);
  return r;
}

CheckResult check_ap_cases(double tolerance) {
  CheckResult r{"ap_hand_sets", true, ""};
  std::ostringstream os;
  for (const ApCase& c : constructed_ap_cases()) {
    for (std::size_t positions : {11u, 40u}) {
      eval::EvalConfig cfg;
      cfg.recall_positions = positions;
      const auto res = eval::average_precision(c.detections, c.ground_truth, c.class_id, cfg);
      const double want = positions == 11 ? c.ap11 : c.ap40;
      const bool ok = res.ap && std::abs(*res.ap - want) <= tolerance;
      if (!ok) r.passed = false;
      os << c.name << "@" << positions << "=" << (res.ap ? fmt(*res.ap) : std::string("none"))
         << (ok ? "" : " (want " + fmt(want) + ")") << " ";
    }
  }
  r.detail = os.str();
  if (!r.detail.empty()) r.detail.pop_back();
  return r;
}

CheckResult check_codec_identity(std::size_t boxes, std::uint64_t seed, double tolerance) {
  CheckResult r{"codec_identity", true, ""};
  const detection::BinCodec codec;
  Rng rng(seed);
  double worst = 0;
  for (std::size_t i = 0; i < boxes; ++i) {
    const int cls = std::uniform_int_distribution<int>(0, kNumClasses - 1)(rng);
    const std::array<double, 3> anchor{uniform(rng, 0, 70), uniform(rng, -40, 40), uniform(rng, -3, 1)};
    const auto& a = codec.anchor(cls);
    Box3D b;
    b.x = anchor[0] + uniform(rng, -0.999, 0.999) * codec.x.extent;
    b.y = anchor[1] + uniform(rng, -0.999, 0.999) * codec.y.extent;
    b.z = anchor[2] + uniform(rng, -1, 1);
    b.h = a.h * uniform(rng, 0.5, 1.5);
    b.w = a.w * uniform(rng, 0.5, 1.5);
    b.l = a.l * uniform(rng, 0.5, 1.5);
    b.theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
    b.class_id = cls;
    const auto t = detection::encode_box(codec, b, anchor);
    const Box3D d = detection::decode_box(codec, t, anchor, cls);
    worst = std::max({worst, std::abs(d.x - b.x), std::abs(d.y - b.y), std::abs(d.z - b.z), std::abs(d.h - b.h),
                      std::abs(d.w - b.w), std::abs(d.l - b.l), std::abs(normalize_angle(d.theta - b.theta))});
    if (t.clamped || d.class_id != cls) worst = std::numeric_limits<double>::infinity();
  }
  r.passed = worst <= tolerance;
  r.detail = std::to_string(boxes) + " boxes, max error " + fmt(worst);
  return r;
}

CheckResult check_trivial_detectors(std::uint64_t seed) {
  CheckResult r{"trivial_detectors", true, ""};
  Rng rng(seed);
  eval::FrameBoxes gts(5), perfect(5), empty(5);
  for (std::size_t f = 0; f < gts.size(); ++f) {
    for (int k = 0; k < 6; ++k) {
      const int cls = k % kNumClasses;
      gts[f].push_back(at(8.0 + 6.0 * k, uniform(rng, -3, 3), cls));
      perfect[f].push_back(labelled(gts[f].back(), cls, uniform(rng, 0.1, 1.0)));
    }
  }
  std::ostringstream os;
  for (std::size_t positions : {11u, 40u}) {
    eval::EvalConfig cfg;
    cfg.recall_positions = positions;
    for (int cls = 0; cls < kNumClasses; ++cls) {
      const auto hit = eval::average_precision(perfect, gts, cls, cfg);
      const auto miss = eval::average_precision(empty, gts, cls, cfg);
      if (!hit.ap || *hit.ap != 100.0 || !miss.ap || *miss.ap != 0.0) {
        r.passed = false;
        os << class_name(cls) << "@" << positions << " perfect=" << (hit.ap ? fmt(*hit.ap) : "none")
           << " empty=" << (miss.ap ? fmt(*miss.ap) : "none") << " ";
      }
    }
  }
  r.detail = r.passed ? "perfect 100, empty 0 at 11 and 40 positions" : os.str();
  return r;
}

}  // namespace catdet::verify
