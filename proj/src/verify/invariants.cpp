#include "catdet/verify/invariants.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "catdet/errors.hpp"
#include "catdet/evalkit/iou.hpp"
#include "catdet/kitti/config.hpp"
#include "catdet/kitti/formats.hpp"
#include "catdet/kitti/scene.hpp"
#include "catdet/omda/contrastive.hpp"
#include "catdet/omda/gt_paste.hpp"
#include "catdet/omda/memory_bank.hpp"
#include "catdet/omda/object_db.hpp"
#include "catdet/pipeline/forward.hpp"

namespace catdet::verify {

namespace {

using num::Rng;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Box3D random_box(Rng& rng) {
  Box3D b;
  b.x = uniform(rng, -4, 4);
  b.y = uniform(rng, -4, 4);
  b.z = uniform(rng, -1, 1);
  b.l = uniform(rng, 0.5, 5);
  b.w = uniform(rng, 0.5, 3);
  b.h = uniform(rng, 0.5, 2);
  b.theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return b;
}

std::string num_str(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Noise pixels keep every channel in [0.15, 0.35]; each object colour leaves that band.
bool painted(const Tensor& image, std::size_t row, std::size_t col) {
  for (std::size_t c = 0; c < 3; ++c) {
    const double v = image(c, row, col);
    if (v < 0.15 || v > 0.35) return true;
  }
  return false;
}

struct PastedFrame {
  kitti::Frame frame;
  omda::PasteResult paste;
};

PastedFrame pasted_frame(std::uint64_t seed) {
  auto cfg = kitti::RunConfig::preset("scaled");
  cfg.scene.seed = seed;
  PastedFrame out{kitti::generate_synthetic(cfg.scene), {}};
  auto donor_spec = cfg.scene;
  donor_spec.seed = seed + 1;
  donor_spec.counts = {2, 2, 2};
  donor_spec.x_range = {8.0, 30.0};
  donor_spec.y_range = {-10.0, 10.0};
  const auto donor = kitti::generate_synthetic(donor_spec);
  std::vector<omda::ObjectSample> db;
  for (const Box3D& b : kitti::target_boxes(donor.labels)) db.push_back(omda::crop_object(donor.cloud, b, "donor"));
  out.paste = omda::gt_paste({out.frame.cloud, kitti::target_boxes(out.frame.labels)}, db, {10, seed});
  return out;
}

}  // namespace

CheckResult check_iou_properties(std::size_t pairs, std::uint64_t seed) {
  CheckResult r{"iou_properties", true, ""};
  Rng rng(seed);
  double worst = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const Box3D a = random_box(rng);
    Box3D b = random_box(rng);
    const double ab = eval::iou_3d(a, b), ba = eval::iou_3d(b, a);
    const double bev_ab = eval::bev_iou(a, b), bev_ba = eval::bev_iou(b, a);
    if (ab < 0 || ab > 1 || bev_ab < 0 || bev_ab > 1) r.passed = false;
    worst = std::max({worst, std::abs(ab - ba), std::abs(bev_ab - bev_ba)});
    b.z = a.z;
    b.h = a.h;
    worst = std::max(worst, std::abs(eval::iou_3d(a, b) - eval::bev_iou(a, b)));
    worst = std::max(worst, std::abs(eval::iou_3d(a, a) - 1.0));
  }
  if (worst > 1e-12) r.passed = false;
  r.detail = std::to_string(pairs) + " pairs, max asymmetry or identity error " + num_str(worst);
  return r;
}

CheckResult check_synthetic_frame(std::uint64_t seed) {
  CheckResult r{"synthetic_frame", true, ""};
  kitti::SyntheticSceneSpec spec;
  spec.seed = seed;
  const auto frame = kitti::generate_synthetic(spec);
  const auto boxes = kitti::target_boxes(frame.labels);
  std::size_t misplaced = 0;
  const auto& labels = *frame.cloud.class_id;
  for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
    const auto p = frame.cloud.point(i);
    std::size_t inside = 0;
    int cls = kBackground;
    for (const Box3D& b : boxes) {
      if (b.contains(p)) {
        ++inside;
        cls = b.class_id;
      }
    }
    const bool ok = labels[i] == kBackground ? inside == 0 : (inside == 1 && cls == labels[i]);
    if (!ok) ++misplaced;
  }
  double max_iou = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) max_iou = std::max(max_iou, eval::bev_iou(boxes[i], boxes[j]));
  }
  std::size_t object_points = 0, on_paint = 0;
  for (std::size_t i = 0; i < frame.cloud.size(); ++i) {
    if (labels[i] == kBackground) continue;
    ++object_points;
    const auto pr = fusion::project_lidar_to_image(frame.calib, frame.cloud.point(i));
    if (!fusion::in_image(pr, frame.image_width(), frame.image_height())) continue;
    if (painted(frame.image, static_cast<std::size_t>(pr.v), static_cast<std::size_t>(pr.u))) ++on_paint;
  }
  const double fraction = object_points ? static_cast<double>(on_paint) / static_cast<double>(object_points) : 1.0;
  r.passed = misplaced == 0 && max_iou == 0.0 && boxes.size() == 4 && fraction >= 0.99;
  r.detail = std::to_string(boxes.size()) + " boxes, " + std::to_string(misplaced) + " misplaced points, max BEV IoU " +
             num_str(max_iou) + ", " + num_str(100.0 * fraction) + "% of object points on their silhouettes";
  return r;
}

CheckResult check_velodyne_roundtrip(std::uint64_t seed) {
  CheckResult r{"velodyne_roundtrip", true, ""};
  Rng rng(seed);
  std::string bytes(16 * 257, '\0');
  for (std::size_t i = 0; i < bytes.size() / 4; ++i) {
    const float v = static_cast<float>(uniform(rng, -80, 80));
    std::memcpy(bytes.data() + 4 * i, &v, 4);
  }
  const std::string again = kitti::write_velodyne(kitti::parse_velodyne(bytes));
  r.passed = again == bytes;
  r.detail = r.passed ? "257 points bit-exact" : "bytes differ after a round trip";
  return r;
}

CheckResult check_gt_paste(std::uint64_t seed) {
  CheckResult r{"gt_paste", true, ""};
  const auto a = pasted_frame(seed);
  const auto b = pasted_frame(seed);
  const auto& rec = a.paste.record;
  const auto& scene = a.paste.scene;
  double max_iou = 0;
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.boxes.size(); ++j) {
      max_iou = std::max(max_iou, eval::bev_iou(scene.boxes[i], scene.boxes[j]));
    }
  }
  std::size_t stray = 0;
  for (std::size_t i = rec.first_point; i < scene.cloud.size(); ++i) {
    const auto p = scene.cloud.point(i);
    const bool inside = std::any_of(rec.pasted.begin(), rec.pasted.end(),
                                    [&](const Box3D& box) { return box.contains(p, 1e-6); });
    if (!inside) ++stray;
  }
  const bool same = a.paste.scene.cloud.coords == b.paste.scene.cloud.coords && rec.db_indices == b.paste.record.db_indices;
  r.passed = !rec.pasted.empty() && max_iou == 0.0 && stray == 0 && same;
  r.detail = std::to_string(rec.pasted.size()) + " pasted, " + std::to_string(rec.rejected.size()) + " rejected, max BEV IoU " +
             num_str(max_iou) + ", " + std::to_string(stray) + " stray points" + (same ? ", deterministic" : ", NOT deterministic");
  return r;
}

CheckResult check_pair_exclusivity(std::uint64_t seed) {
  CheckResult r{"pair_exclusivity", true, ""};
  const auto a = pasted_frame(seed);
  const auto& cloud = a.paste.scene.cloud;
  const std::size_t split = a.paste.record.first_point;
  std::vector<std::size_t> raw_idx(split), pasted_idx(cloud.size() - split);
  for (std::size_t i = 0; i < split; ++i) raw_idx[i] = i;
  for (std::size_t i = split; i < cloud.size(); ++i) pasted_idx[i - split] = i;
  const PointCloud raw = select_points(cloud, raw_idx), pasted = select_points(cloud, pasted_idx);
  std::vector<double> scores(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) scores[i] = (*raw.class_id)[i] == kBackground ? 0.0 : 1.0;
  const auto pairs = omda::build_point_pairs(raw, pasted, a.frame.calib, a.frame.image_width(), a.frame.image_height(),
                                             scores, 0.3);
  r.passed = pairs.exclusive() && pairs.diagnostics.raw_anchors > 0 && pairs.diagnostics.pasted_anchors > 0;
  r.detail = std::to_string(pairs.diagnostics.raw_anchors) + " raw and " + std::to_string(pairs.diagnostics.pasted_anchors) +
             " pasted anchors, " + std::to_string(pairs.diagnostics.excluded_overlaps) + " shared-pixel negatives removed";
  return r;
}

CheckResult check_memory_bank(std::uint64_t seed) {
  CheckResult r{"memory_bank", true, ""};
  Rng rng(seed);
  omda::MemoryBank bank(4, 5);
  std::vector<std::vector<double>> pushed;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> f(4);
    for (double& v : f) v = uniform(rng, -2, 2);
    pushed.push_back(f);
    bank.enqueue(kCar, omda::Modality::kImage, f);
  }
  const auto& q = bank.queue(kCar, omda::Modality::kImage);
  double worst = 0;
  for (const auto& e : q) worst = std::max(worst, std::abs(num::l2_norm(e) - 1.0));
  const auto oldest = num::l2_normalized(pushed[3]);
  for (std::size_t k = 0; k < 4; ++k) worst = std::max(worst, std::abs(q.front()[k] - oldest[k]));
  r.passed = q.size() == 5 && bank.total() == 5 && worst < 1e-12;
  r.detail = "capacity 5 after 8 pushes, max norm or order error " + num_str(worst);
  return r;
}

CheckResult check_scaled_forward(std::uint64_t seed) {
  CheckResult r{"scaled_forward", true, ""};
  auto cfg = kitti::RunConfig::preset("scaled");
  cfg.seed = seed;
  cfg.scene.seed = seed;
  const auto run = pipeline::run_forward(cfg, pipeline::synthetic_frame(cfg));
  const auto& pc = cfg.model.point;
  const std::vector<std::size_t> want{pc.root_points, pc.counts[0], pc.counts[1], pc.counts[2], pc.counts[3],
                                      pc.counts[2], pc.counts[1], pc.counts[0], pc.root_points};
  bool finite = true;
  try {
    run.output.features.check_finite("scaled forward");
  } catch (const NumericError&) {
    finite = false;
  }
  r.passed = finite && run.output.trace.point_counts == want && run.output.features.dim(0) == pc.root_points;
  r.detail = "features " + run.output.features.shape_string() + (finite ? " finite" : " NOT finite") + ", " +
             num_str(run.forward_seconds) + " s";
  return r;
}

std::vector<CheckResult> run_invariants(std::uint64_t seed) {
  return {check_iou_properties(200, seed), check_synthetic_frame(seed), check_velodyne_roundtrip(seed),
          check_gt_paste(seed),           check_pair_exclusivity(seed), check_memory_bank(seed),
          check_scaled_forward(seed)};
}

}  // namespace catdet::verify
