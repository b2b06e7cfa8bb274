#include "catdet/omda/gt_paste.hpp"

#include <algorithm>
#include <random>

#include "catdet/errors.hpp"
#include "catdet/evalkit/iou.hpp"

namespace catdet::omda {
namespace {

PointCloud placed_points(const ObjectSample& s, const PointCloud& like) {
  const std::size_t n = s.points.size();
  PointCloud pc;
  pc.coords = Tensor({n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = s.box.to_world(s.points.point(i));
    for (std::size_t k = 0; k < 3; ++k) pc.coords(i, k) = w[k];
  }
  if (like.features) {
    const std::size_t c = like.feature_width();
    Tensor f({n, c});
    if (s.points.features && s.points.feature_width() == c) f = *s.points.features;
    pc.features = std::move(f);
  }
  if (like.fg_score) pc.fg_score = std::vector<double>(n, 1.0);
  if (like.class_id) pc.class_id = std::vector<int>(n, s.class_id());
  return pc;
}

}  // namespace

PasteResult gt_paste(const Scene& scene, const std::vector<ObjectSample>& db, const PasteConfig& cfg) {
  PasteResult res{scene, {}};
  res.record.first_point = scene.cloud.size();
  if (db.empty() || cfg.max_paste == 0) return res;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < db.size(); ++i) {
    db[i].validate();
    by_class[static_cast<std::size_t>(db[i].class_id())].push_back(i);
  }
  for (auto& list : by_class) std::shuffle(list.begin(), list.end(), rng);

  std::vector<std::size_t> order;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (const auto& list : by_class) {
      if (round < list.size()) {
        order.push_back(list[round]);
        any = true;
      }
    }
    if (!any) break;
  }

  std::vector<Box3D> occupied = scene.boxes;
  for (std::size_t idx : order) {
    if (res.record.pasted.size() >= cfg.max_paste) break;
    const Box3D& cand = db[idx].box;
    const bool collides = std::any_of(occupied.begin(), occupied.end(),
                                      [&](const Box3D& b) { return eval::bev_iou(b, cand) > 0.0; });
    if (collides) {
      res.record.rejected.push_back(idx);
      continue;
    }
    occupied.push_back(cand);
    res.record.pasted.push_back(cand);
    res.record.db_indices.push_back(idx);
    res.record.point_counts.push_back(db[idx].points.size());
    res.scene.boxes.push_back(cand);
  }
  if (res.record.pasted.empty()) return res;

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
    const auto p = scene.cloud.point(i);
    if (std::none_of(res.record.pasted.begin(), res.record.pasted.end(), [&](const Box3D& b) { return b.contains(p); })) {
      kept.push_back(i);
    }
  }
  res.record.removed_points = scene.cloud.size() - kept.size();
  res.record.first_point = kept.size();
  PointCloud cloud = kept.empty() ? PointCloud{} : select_points(scene.cloud, kept);
  for (std::size_t idx : res.record.db_indices) {
    PointCloud obj = placed_points(db[idx], scene.cloud);
    cloud = cloud.size() == 0 ? std::move(obj) : append_points(cloud, obj);
  }
  res.scene.cloud = std::move(cloud);
  return res;
}

}  // namespace catdet::omda
