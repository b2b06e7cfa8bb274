#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catdet/detection/box3d.hpp"

namespace catdet::eval {

enum class IouMetric { kBev, k3d };

struct EvalConfig {
  std::array<double, kNumClasses> iou_threshold{0.7, 0.5, 0.5};
  std::size_t recall_positions = 11;  // 11 or 40
  IouMetric metric = IouMetric::k3d;
  /// Worker threads for per-frame matching; results do not depend on it.
  std::size_t jobs = 1;

  void validate() const;
  /// 0, 0.1, ..., 1 for 11 positions; 1/40, ..., 1 for 40.
  std::vector<double> recall_points() const;
};

struct PrSample {
  double recall = 0;
  double precision = 0;
};

struct ApResult {
  int class_id = kCar;
  /// Absent when the class has no ground-truth boxes.
  std::optional<double> ap;
  std::size_t gt_count = 0;
  std::size_t detections = 0;
  std::size_t true_positives = 0;
  /// Raw PR points after each ranked detection.
  std::vector<PrSample> curve;
};

using FrameBoxes = std::vector<std::vector<Box3D>>;

/// Detections are matched per frame in descending score order to the unmatched
/// ground truth of highest IoU at or above the class threshold; ties in score
/// keep input order. AP is the mean interpolated precision times 100.
ApResult average_precision(const FrameBoxes& detections, const FrameBoxes& ground_truth, int class_id,
                           const EvalConfig& cfg);

/// Interpolated AP (percent) from raw PR points.
double interpolated_ap(const std::vector<PrSample>& curve, const std::vector<double>& recall_points);

/// Throws ArgumentError for empty samples and Error for unwritable paths.
void emit_pr_curve(const std::vector<PrSample>& samples, const std::filesystem::path& csv_path,
                   const std::filesystem::path& svg_path);
std::string pr_curve_csv(const std::vector<PrSample>& samples);
std::string pr_curve_svg(const std::vector<PrSample>& samples);

}  // namespace catdet::eval
