#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "catdet/detection/box3d.hpp"

namespace catdet::eval {

using Point2 = std::array<double, 2>;

/// Signed area; positive for counter-clockwise vertex order.
double polygon_area(const std::vector<Point2>& poly);

/// Sutherland-Hodgman: clips `subject` against the convex counter-clockwise polygon `clip`.
std::vector<Point2> clip_polygon(const std::vector<Point2>& subject, const std::vector<Point2>& clip);

double bev_intersection_area(const Box3D& a, const Box3D& b);

/// Rotated-rectangle IoU in the ground plane; 0 for zero-area boxes.
double bev_iou(const Box3D& a, const Box3D& b);
/// BEV intersection times vertical overlap over the volume union; z is the box centre.
double iou_3d(const Box3D& a, const Box3D& b);

/// Greedy BEV-IoU suppression by descending score (ties keep input order).
/// Returns the indices of the kept boxes in that order.
std::vector<std::size_t> nms_bev(const std::vector<Box3D>& boxes, double iou_threshold);

}  // namespace catdet::eval
