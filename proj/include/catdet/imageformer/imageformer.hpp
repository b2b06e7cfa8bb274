#pragma once

#include <array>
#include <cstddef>

#include "catdet/imageformer/encoder.hpp"
#include "catdet/numerics/ops.hpp"

namespace catdet::imageformer {

inline constexpr std::size_t kLevels = 4;

struct ImageformerConfig {
  std::size_t width = 1280;
  std::size_t height = 384;
  std::size_t input_channels = 3;
  std::array<std::size_t, kLevels> channels{64, 128, 256, 512};
  std::array<std::size_t, kLevels> patches{32, 16, 8, 4};
  std::size_t heads = 4;
  /// Shared token width after patch projection.
  std::size_t embed_dim = 1024;
  std::array<std::size_t, kLevels> up_strides{2, 4, 8, 16};
  std::size_t up_channels = 16;
  std::size_t out_channels = 32;
  std::size_t kernel = 3;

  static ImageformerConfig paper();
  /// 128x64 input, internal maps 64x32 .. 8x4, 32 tokens per level.
  static ImageformerConfig scaled();

  void validate() const;
  std::size_t map_width(std::size_t level) const { return width >> (level + 1); }
  std::size_t map_height(std::size_t level) const { return height >> (level + 1); }
  std::size_t tokens(std::size_t level) const;
};

/// Level geometry handed to itb_forward.
struct ItbLevelConfig {
  std::size_t in_channels = 3;
  std::size_t channels = 64;
  std::size_t patch = 32;
  std::size_t heads = 4;
  std::size_t kernel = 3;
};

struct ItbParams {
  Tensor conv1_weight, conv1_bias;  // stride 2
  Tensor conv2_weight, conv2_bias;  // stride 1
  num::LinearParams embed;          // C*s*s -> D
  EncoderParams encoder;
  num::LinearParams unembed;        // D -> C*s*s
};

struct ImageformerParams {
  std::array<ItbParams, kLevels> blocks;
  Tensor position;  // [tokens, D], shared by all levels
  std::array<Tensor, kLevels> up_weight, up_bias;
  Tensor fuse_weight, fuse_bias;  // 1x1 conv over the concatenated UP outputs
};

ItbParams init_itb(const ItbLevelConfig& level, std::size_t embed_dim, num::Rng& rng);
ImageformerParams init_imageformer(const ImageformerConfig& cfg, num::Rng& rng);

/// conv(stride 2) -> ReLU -> conv(stride 1) -> ReLU -> patchify -> embed (+position)
/// -> multi-head encoder -> unembed -> unpatchify. Output is half the input extent.
Tensor itb_forward(const ItbLevelConfig& level, const ItbParams& params, const Tensor& position, const Tensor& map);

struct ImageformerOutput {
  std::array<Tensor, kLevels> levels;     // ITB outputs
  std::array<Tensor, kLevels> upsampled;  // per-level UP outputs at full resolution
  Tensor fused;                           // [out_channels, H, W]
};

ImageformerOutput imageformer_forward(const ImageformerConfig& cfg, const ImageformerParams& params,
                                      const Tensor& image);

}  // namespace catdet::imageformer
