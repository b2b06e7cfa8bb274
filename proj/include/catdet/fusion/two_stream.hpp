#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "catdet/fusion/calibration.hpp"
#include "catdet/fusion/cmt.hpp"
#include "catdet/imageformer/imageformer.hpp"
#include "catdet/pointformer/pointformer.hpp"

namespace catdet::fusion {

/// CMT layers: 1-4 follow the point/image blocks, 5 acts on full-resolution features.
inline constexpr std::size_t kCmtLayers = 5;

struct LevelFusion {
  Tensor features;
  std::size_t out_of_image = 0;
};

/// Projects the level's points into the image, samples `image_map` (whose
/// extent may be a fraction of the image's), and runs the CMT on the pair.
/// Pixel centres map between resolutions as u' = (u + 0.5) * w / W - 0.5.
LevelFusion fuse_level(const CmtParams& params, const PointCloud& points, const Tensor& image_map,
                       const Calibration& calib, std::size_t image_width, std::size_t image_height,
                       const CmtConfig& cfg = {});

struct TwoStreamConfig {
  pointformer::PointformerConfig point;
  imageformer::ImageformerConfig image;
  std::array<bool, kCmtLayers> cmt_layers{true, true, true, true, true};
  CmtConfig cmt;

  static TwoStreamConfig paper();
  static TwoStreamConfig scaled();
  void validate() const;
};

struct TwoStreamParams {
  pointformer::PointformerParams point;
  imageformer::ImageformerParams image;
  std::array<CmtParams, kCmtLayers> cmt;
};

TwoStreamParams init_two_stream(const TwoStreamConfig& cfg, num::Rng& rng);

struct ShapeTrace {
  /// Root, the four block outputs, then the four FP outputs.
  std::vector<std::size_t> point_counts;
  std::array<std::size_t, pointformer::kLevels> pt_channels{};
  std::array<std::size_t, imageformer::kLevels> it_channels{};
  std::array<std::array<std::size_t, 2>, imageformer::kLevels> it_maps{};  // width, height
  std::array<std::size_t, imageformer::kLevels> tokens{};
  std::array<bool, kCmtLayers> cmt_active{};
  std::array<std::size_t, kCmtLayers> out_of_image{};
  std::size_t output_width = 0;
  std::array<std::size_t, 3> fused_map{};  // channels, height, width
};

struct TwoStreamOutput {
  pointformer::PointformerOutput point;
  imageformer::ImageformerOutput image;
  Tensor features;  // [N, fp width] after Layer 5
  ShapeTrace trace;
};

/// Image stream first, then the point stream with CMT enrichment after each
/// enabled block, then Layer 5 on the FP output. `image` is [3, H, W].
TwoStreamOutput two_stream_forward(const TwoStreamConfig& cfg, const TwoStreamParams& params, const PointCloud& pc,
                                   const Tensor& image, const Calibration& calib);

}  // namespace catdet::fusion
