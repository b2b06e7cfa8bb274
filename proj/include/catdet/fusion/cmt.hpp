#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "catdet/numerics/ops.hpp"

namespace catdet::fusion {

struct ImageSample {
  Tensor features;                  // [n, C]
  std::vector<bool> out_of_bounds;  // per pixel, true where the sample was clamped
  std::size_t clamped = 0;
};

/// Bilinear sampling of a [C, H, W] map at (u, v) = (column, row) positions.
/// Out-of-range positions are clamped to the border and flagged.
ImageSample sample_image_features(const Tensor& map, const std::vector<std::array<double, 2>>& pixels);

struct CmtConfig {
  /// Divide attention logits by sqrt(d). Off by default.
  bool scale_attention = false;
  /// Query rows processed per attention block; bounds peak memory at block * n.
  std::size_t block_rows = 1024;
};

struct CmtParams {
  num::LinearParams image_proj;  // C_i -> d
  num::LinearParams q_point, k_point, v_point;
  num::LinearParams q_image, k_image, v_image;
  num::LinearParams compress;  // 4d -> out

  std::size_t point_dim() const { return q_point.in_dim(); }
  std::size_t image_dim() const { return image_proj.in_dim(); }
  std::size_t out_dim() const { return compress.out_dim(); }
  void validate() const;
};

CmtParams init_cmt(std::size_t point_dim, std::size_t image_dim, std::size_t out_dim, num::Rng& rng);

struct CmtOutput {
  Tensor output;         // [n, out]
  Tensor point_context;  // softmax(Q_I K_P^T) V_P
  Tensor image_context;  // softmax(Q_P K_I^T) V_I
};

/// Cross-modal interaction for n aligned point/image feature rows. Both
/// modalities are mapped to d = point width; the output compresses
/// [F_P | proj(F_I) | point context | image context].
CmtOutput cmt_forward(const CmtParams& params, const Tensor& point_feats, const Tensor& image_feats,
                      const CmtConfig& cfg = {});

struct CmtAttention {
  Tensor point_from_image;  // A_{P<-I} = softmax(Q_I K_P^T), [n, n]
  Tensor image_from_point;  // A_{I<-P} = softmax(Q_P K_I^T), [n, n]
};

/// The full attention matrices; intended for small n.
CmtAttention cmt_attention(const CmtParams& params, const Tensor& point_feats, const Tensor& image_feats,
                           const CmtConfig& cfg = {});

}  // namespace catdet::fusion
