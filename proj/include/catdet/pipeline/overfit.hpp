#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "catdet/kitti/config.hpp"

namespace catdet::pipeline {

struct OverfitOptions {
  kitti::RunConfig config = kitti::RunConfig::preset("scaled");
  std::size_t steps = 200;
  double lr = 1e-2;
  /// Learning rate of the contrastive projectors.
  double projector_lr = 3e-3;
  /// Refinement proposals on top of one per ground-truth box.
  std::size_t extra_proposals = 8;
  std::size_t projection_dim = 16;
  std::size_t seg_hidden = 32;
};

struct StepRecord {
  std::size_t step = 0;
  double seg = 0, pg = 0, rcnn = 0, cl_point = 0, cl_object = 0, total = 0;
  double accuracy = 0;
};

struct OverfitReport {
  /// Losses before each update, plus one final record after the last update.
  std::vector<StepRecord> records;
  std::size_t points = 0;
  std::size_t pasted_points = 0;
  std::size_t pasted_objects = 0;
  std::size_t point_anchors = 0;
  std::size_t proposals = 0;
  double seconds = 0;

  const StepRecord& initial() const { return records.front(); }
  const StepRecord& final() const { return records.back(); }
};

/// Toy training on one synthetic frame: GT-Paste from a second frame, one
/// frozen two-stream forward pass, then Adam on the segmentation head, the
/// per-point proposal head, the refinement heads and the two contrastive
/// projectors against L_tot. The memory bank is filled by momentum copies of
/// the projectors. Point pairs use label-derived scores so they stay fixed.
OverfitReport run_overfit(const OverfitOptions& options, const std::function<void(const StepRecord&)>& on_step = {});

}  // namespace catdet::pipeline
