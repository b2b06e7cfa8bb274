#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "catdet/omda/object_db.hpp"

namespace catdet::omda {

/// A point cloud with its labelled boxes.
struct Scene {
  PointCloud cloud;
  std::vector<Box3D> boxes;
};

struct PasteConfig {
  std::size_t max_paste = 10;
  std::uint64_t seed = 0;
};

struct PasteRecord {
  std::vector<Box3D> pasted;
  std::vector<std::size_t> db_indices;
  std::vector<std::size_t> rejected;  // db indices refused for overlap
  std::size_t first_point = 0;        // index of the first appended point
  std::size_t removed_points = 0;     // scene points dropped from inside pasted boxes
  std::vector<std::size_t> point_counts;
};

struct PasteResult {
  Scene scene;
  PasteRecord record;
};

/// Pastes database objects at their recorded poses. Candidates are drawn
/// class-stratified (round-robin over shuffled per-class lists); a candidate
/// whose box has BEV IoU > 0 with any existing or accepted box is rejected.
/// Scene points inside an accepted box are removed before the object's points
/// are appended. Appended points carry the object's class id and, when the
/// scene has scores, a score of 1.
PasteResult gt_paste(const Scene& scene, const std::vector<ObjectSample>& db, const PasteConfig& cfg);

}  // namespace catdet::omda
