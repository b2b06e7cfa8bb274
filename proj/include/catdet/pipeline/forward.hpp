#pragma once

#include "catdet/fusion/two_stream.hpp"
#include "catdet/kitti/config.hpp"
#include "catdet/kitti/scene.hpp"

namespace catdet::pipeline {

struct ForwardRun {
  PointCloud input;  // cropped and resampled to the configured root count
  fusion::TwoStreamOutput output;
  double init_seconds = 0;
  double forward_seconds = 0;
};

/// Synthetic frame for the configured scene.
kitti::Frame synthetic_frame(const kitti::RunConfig& config);

/// Range crop, seeded resample to the root count, seeded weight init, then the
/// two-stream forward.
ForwardRun run_forward(const kitti::RunConfig& config, const kitti::Frame& frame);

}  // namespace catdet::pipeline
