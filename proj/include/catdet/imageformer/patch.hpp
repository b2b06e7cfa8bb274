#pragma once

#include <cstddef>

#include "catdet/tensor.hpp"

namespace catdet::imageformer {

/// [C,H,W] -> [(H/s)(W/s), C*s*s]. Tokens are ordered row-major over the patch
/// grid; within a token values are ordered (channel, dy, dx).
Tensor patchify(const Tensor& map, std::size_t patch);

/// Exact inverse of patchify.
Tensor unpatchify(const Tensor& tokens, std::size_t channels, std::size_t height, std::size_t width,
                  std::size_t patch);

}  // namespace catdet::imageformer
