#include "catdet/imageformer/imageformer.hpp"

#include <string>

#include "catdet/errors.hpp"
#include "catdet/imageformer/patch.hpp"

namespace catdet::imageformer {

ImageformerConfig ImageformerConfig::paper() { return ImageformerConfig{}; }

ImageformerConfig ImageformerConfig::scaled() {
  ImageformerConfig cfg;
  cfg.width = 128;
  cfg.height = 64;
  cfg.channels = {8, 16, 16, 32};
  cfg.patches = {8, 4, 2, 1};
  cfg.embed_dim = 32;
  cfg.up_channels = 4;
  cfg.out_channels = 16;
  return cfg;
}

std::size_t ImageformerConfig::tokens(std::size_t level) const {
  return (map_width(level) / patches.at(level)) * (map_height(level) / patches.at(level));
}

void ImageformerConfig::validate() const {
  const std::size_t reduction = std::size_t{1} << kLevels;
  if (width == 0 || height == 0 || width % reduction != 0 || height % reduction != 0) {
    throw ArgumentError("imageformer: resolution must be a positive multiple of " + std::to_string(reduction));
  }
  if (heads == 0 || embed_dim % heads != 0) throw ArgumentError("imageformer: embed_dim must be divisible by heads");
  if (input_channels == 0 || up_channels == 0 || out_channels == 0 || kernel == 0 || kernel % 2 == 0) {
    throw ArgumentError("imageformer: channel counts must be positive and the kernel odd");
  }
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (channels[l] == 0) throw ArgumentError("imageformer: channels must be positive");
    const std::size_t p = patches[l];
    if (p == 0 || map_width(l) % p != 0 || map_height(l) % p != 0) {
      throw ArgumentError("imageformer: patch " + std::to_string(p) + " does not divide level " + std::to_string(l + 1) +
                          " map");
    }
    if (tokens(l) != tokens(0)) throw ArgumentError("imageformer: token count must be equal at every level");
    if (up_strides[l] != (std::size_t{1} << (l + 1))) {
      throw ArgumentError("imageformer: UP stride of level " + std::to_string(l + 1) + " must be " +
                          std::to_string(std::size_t{1} << (l + 1)));
    }
  }
}

ItbParams init_itb(const ItbLevelConfig& level, std::size_t embed_dim, num::Rng& rng) {
  ItbParams p;
  const std::size_t k = level.kernel;
  const std::size_t fan1 = level.in_channels * k * k, fan2 = level.channels * k * k;
  p.conv1_weight = num::init_uniform({level.channels, level.in_channels, k, k}, fan1, rng);
  p.conv1_bias = num::init_uniform({level.channels}, fan1, rng);
  p.conv2_weight = num::init_uniform({level.channels, level.channels, k, k}, fan2, rng);
  p.conv2_bias = num::init_uniform({level.channels}, fan2, rng);
  const std::size_t token_width = level.channels * level.patch * level.patch;
  p.embed = num::init_linear(token_width, embed_dim, rng);
  p.encoder = init_encoder(embed_dim, rng);
  p.unembed = num::init_linear(embed_dim, token_width, rng);
  return p;
}

namespace {

ItbLevelConfig level_config(const ImageformerConfig& cfg, std::size_t l) {
  return ItbLevelConfig{l == 0 ? cfg.input_channels : cfg.channels[l - 1], cfg.channels[l], cfg.patches[l], cfg.heads,
                        cfg.kernel};
}

}  // namespace

ImageformerParams init_imageformer(const ImageformerConfig& cfg, num::Rng& rng) {
  cfg.validate();
  ImageformerParams p;
  for (std::size_t l = 0; l < kLevels; ++l) p.blocks[l] = init_itb(level_config(cfg, l), cfg.embed_dim, rng);
  p.position = num::init_uniform({cfg.tokens(0), cfg.embed_dim}, cfg.embed_dim, rng);
  for (std::size_t l = 0; l < kLevels; ++l) {
    const std::size_t s = cfg.up_strides[l];
    const std::size_t fan = cfg.channels[l];
    p.up_weight[l] = num::init_uniform({cfg.channels[l], cfg.up_channels, s, s}, fan, rng);
    p.up_bias[l] = num::init_uniform({cfg.up_channels}, fan, rng);
  }
  const std::size_t fused_in = kLevels * cfg.up_channels;
  p.fuse_weight = num::init_uniform({cfg.out_channels, fused_in, 1, 1}, fused_in, rng);
  p.fuse_bias = num::init_uniform({cfg.out_channels}, fused_in, rng);
  return p;
}

Tensor itb_forward(const ItbLevelConfig& level, const ItbParams& params, const Tensor& position, const Tensor& map) {
  if (map.rank() != 3 || map.dim(0) != level.in_channels) {
    throw ShapeError("itb_forward: input map " + map.shape_string() + " does not have " +
                     std::to_string(level.in_channels) + " channels");
  }
  const std::size_t pad = level.kernel / 2;
  Tensor x = num::relu(num::conv2d(map, params.conv1_weight, 2, pad, &params.conv1_bias));
  x = num::relu(num::conv2d(x, params.conv2_weight, 1, pad, &params.conv2_bias));
  const std::size_t channels = x.dim(0), height = x.dim(1), width = x.dim(2);

  Tensor tokens = num::linear_forward(params.embed, patchify(x, level.patch));
  if (position.shape() != tokens.shape()) {
    throw ShapeError("itb_forward: position table " + position.shape_string() + " does not match tokens " +
                     tokens.shape_string());
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] += position[i];
  tokens = multihead_encoder(tokens, level.heads, params.encoder);
  return unpatchify(num::linear_forward(params.unembed, tokens), channels, height, width, level.patch);
}

ImageformerOutput imageformer_forward(const ImageformerConfig& cfg, const ImageformerParams& params,
                                      const Tensor& image) {
  cfg.validate();
  if (image.rank() != 3 || image.dim(0) != cfg.input_channels || image.dim(1) != cfg.height ||
      image.dim(2) != cfg.width) {
    throw ShapeError("imageformer_forward: image " + image.shape_string() + " does not match configured " +
                     std::to_string(cfg.input_channels) + "x" + std::to_string(cfg.height) + "x" +
                     std::to_string(cfg.width));
  }
  ImageformerOutput out;
  const Tensor* current = &image;
  for (std::size_t l = 0; l < kLevels; ++l) {
    out.levels[l] = itb_forward(level_config(cfg, l), params.blocks[l], params.position, *current);
    current = &out.levels[l];
  }
  const std::size_t plane = cfg.height * cfg.width;
  Tensor stacked({kLevels * cfg.up_channels, cfg.height, cfg.width});
  for (std::size_t l = 0; l < kLevels; ++l) {
    const std::size_t s = cfg.up_strides[l];
    out.upsampled[l] = num::conv_transpose2d(out.levels[l], params.up_weight[l], s, 0, &params.up_bias[l]);
    if (out.upsampled[l].dim(1) != cfg.height || out.upsampled[l].dim(2) != cfg.width) {
      throw ShapeError("imageformer_forward: UP layer did not restore the input resolution");
    }
    std::copy(out.upsampled[l].data().begin(), out.upsampled[l].data().end(),
              stacked.data().begin() + static_cast<std::ptrdiff_t>(l * cfg.up_channels * plane));
  }
  out.fused = num::conv2d(stacked, params.fuse_weight, 1, 0, &params.fuse_bias);
  return out;
}

}  // namespace catdet::imageformer
