#include "catdet/pipeline/forward.hpp"

#include <chrono>

namespace catdet::pipeline {

kitti::Frame synthetic_frame(const kitti::RunConfig& config) { return kitti::generate_synthetic(config.scene); }

ForwardRun run_forward(const kitti::RunConfig& config, const kitti::Frame& frame) {
  using Clock = std::chrono::steady_clock;
  ForwardRun run;
  const auto t0 = Clock::now();
  const PointCloud cropped = kitti::crop_range(frame.cloud, config.seed);
  run.input = kitti::resample_to(cropped, config.model.point.root_points, config.seed);
  num::Rng rng(config.seed);
  const auto params = fusion::init_two_stream(config.model, rng);
  const auto t1 = Clock::now();
  run.output = fusion::two_stream_forward(config.model, params, run.input, frame.image, frame.calib);
  const auto t2 = Clock::now();
  run.init_seconds = std::chrono::duration<double>(t1 - t0).count();
  run.forward_seconds = std::chrono::duration<double>(t2 - t1).count();
  return run;
}

}  // namespace catdet::pipeline
