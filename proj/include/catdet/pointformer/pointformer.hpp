#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "catdet/numerics/ops.hpp"
#include "catdet/pointformer/basic_transformer.hpp"
#include "catdet/pointops/point_cloud.hpp"

namespace catdet::pointformer {

inline constexpr std::size_t kLevels = 4;

struct PtbLevelConfig {
  std::size_t points = 0;
  double radius = 0.0;
  std::size_t channels = 0;
  std::size_t neighbors = 32;
  std::size_t projection_dim = 512;
};

struct PointformerConfig {
  std::size_t root_points = 16384;
  std::array<std::size_t, kLevels> counts{4096, 1024, 256, 64};
  std::array<double, kLevels> radii{0.1, 0.5, 1.0, 2.0};
  std::array<std::size_t, kLevels> channels{96, 256, 512, 1024};
  std::array<std::size_t, kLevels> neighbors{32, 32, 32, 32};
  std::size_t projection_dim = 512;
  std::size_t fp_stride = 4;
  /// Output widths of the four FP layers, coarse to fine.
  std::array<std::size_t, kLevels> fp_channels{512, 256, 128, 128};
  std::size_t input_channels = 1;

  static PointformerConfig paper();
  /// Desk-scale variant: 256 -> 64 -> 16 -> 8 -> 4 points.
  static PointformerConfig scaled();

  void validate() const;
  PtbLevelConfig level(std::size_t index) const;
  std::size_t level_input_width(std::size_t index) const;
  std::size_t output_width() const { return fp_channels.back(); }
};

struct PtbParams {
  BtParams local;
  BtParams global;
  num::LinearParams compress;  // 2d -> d
};

struct PointformerParams {
  std::array<PtbParams, kLevels> blocks;
  std::array<num::MlpParams, kLevels> fp;
};

PtbParams init_ptb(std::size_t in_dim, const PtbLevelConfig& level, num::Rng& rng);
PointformerParams init_pointformer(const PointformerConfig& cfg, num::Rng& rng);

/// One point transformer block: FPS to `level.points` centroids, local layer
/// over each centroid's ball group, global layer over all centroids, concat,
/// linear compression to `level.channels`. Optional per-point fields of the
/// sampled points are carried over.
PointCloud ptb_forward(const PtbLevelConfig& level, const PtbParams& params, const PointCloud& pc);

/// Called after each block with the level index (0-based) and its output; a
/// non-empty return value replaces that level's features.
using LevelHook = std::function<Tensor(std::size_t level, const PointCloud& cloud)>;

struct PointformerOutput {
  std::array<PointCloud, kLevels> levels;
  /// FP outputs in order: level 3, level 2, level 1, root resolution.
  std::array<Tensor, kLevels> upsampled;
  const Tensor& features() const { return upsampled.back(); }
};

/// Four blocks followed by four FP layers that restore the input resolution.
/// Each FP layer interpolates the coarser features onto the finer points,
/// concatenates the finer level's own features and applies an MLP.
PointformerOutput pointformer_forward(const PointformerConfig& cfg, const PointformerParams& params,
                                      const PointCloud& pc, const LevelHook& hook = {});

}  // namespace catdet::pointformer
