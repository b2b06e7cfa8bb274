#include "catdet/imageformer/patch.hpp"

#include "catdet/errors.hpp"

namespace catdet::imageformer {
namespace {

void check_divisible(std::size_t height, std::size_t width, std::size_t patch) {
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw ShapeError("patch size " + std::to_string(patch) + " does not divide " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

}  // namespace

Tensor patchify(const Tensor& map, std::size_t patch) {
  if (map.rank() != 3) throw ShapeError("patchify expects a [C,H,W] map");
  const std::size_t channels = map.dim(0), height = map.dim(1), width = map.dim(2);
  check_divisible(height, width, patch);
  const std::size_t grid_h = height / patch, grid_w = width / patch;
  Tensor tokens({grid_h * grid_w, channels * patch * patch});
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      auto token = tokens.row(gy * grid_w + gx);
      std::size_t k = 0;
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t dy = 0; dy < patch; ++dy) {
          for (std::size_t dx = 0; dx < patch; ++dx) token[k++] = map(c, gy * patch + dy, gx * patch + dx);
        }
      }
    }
  }
  return tokens;
}

Tensor unpatchify(const Tensor& tokens, std::size_t channels, std::size_t height, std::size_t width,
                  std::size_t patch) {
  check_divisible(height, width, patch);
  const std::size_t grid_h = height / patch, grid_w = width / patch;
  if (tokens.rank() != 2 || tokens.dim(0) != grid_h * grid_w || tokens.dim(1) != channels * patch * patch) {
    throw ShapeError("unpatchify: tokens " + tokens.shape_string() + " do not tile the requested map");
  }
  Tensor map({channels, height, width});
  for (std::size_t gy = 0; gy < grid_h; ++gy) {
    for (std::size_t gx = 0; gx < grid_w; ++gx) {
      auto token = tokens.row(gy * grid_w + gx);
      std::size_t k = 0;
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t dy = 0; dy < patch; ++dy) {
          for (std::size_t dx = 0; dx < patch; ++dx) map(c, gy * patch + dy, gx * patch + dx) = token[k++];
        }
      }
    }
  }
  return map;
}

}  // namespace catdet::imageformer
