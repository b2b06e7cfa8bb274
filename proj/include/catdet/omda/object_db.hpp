#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "catdet/detection/box3d.hpp"
#include "catdet/pointops/point_cloud.hpp"

namespace catdet::omda {

/// Ground-truth object cropped from a frame. Points are stored in the box
/// frame (origin at the centre, x along the heading) so they can be placed
/// back at the recorded pose with box.to_world.
struct ObjectSample {
  PointCloud points;
  Box3D box;
  std::string source;

  int class_id() const { return box.class_id; }
  /// Throws unless there is at least one point and every point lies inside the box.
  void validate() const;
};

/// Points of `scene` inside `box` (closed, optional margin), moved to the box frame.
ObjectSample crop_object(const PointCloud& scene, const Box3D& box, const std::string& source, double margin = 0.0);

/// Directory layout: index.json plus one float32 (x, y, z, feature0) file per object.
void save_object_db(const std::filesystem::path& dir, const std::vector<ObjectSample>& samples);
std::vector<ObjectSample> load_object_db(const std::filesystem::path& dir);

}  // namespace catdet::omda
