#pragma once

#include <cstddef>
#include <span>

#include "catdet/numerics/ops.hpp"
#include "catdet/tensor.hpp"

namespace catdet::pointformer {

/// Parameters of one vector self-attention layer.
///
/// phi/psi/alpha map input features (width in) to the layer width d; theta encodes
/// the relative position p_i - p_j (3 -> d -> d); gamma maps the attention
/// relation to per-channel logits (d -> projection -> d).
struct BtParams {
  num::LinearParams phi, psi, alpha;
  num::MlpParams gamma, theta;

  std::size_t in_dim() const { return phi.in_dim(); }
  std::size_t width() const { return phi.out_dim(); }
  void validate() const;
};

BtParams init_bt(std::size_t in_dim, std::size_t width, std::size_t projection_dim, num::Rng& rng);

/// Evaluates the layer for many centres over one point set, sharing the
/// pointwise projections. Holds references: params and coords must outlive it.
class BtEvaluator {
 public:
  BtEvaluator(const BtParams& params, const Tensor& coords, const Tensor& feats);

  /// y_i = sum_j softmax_j(gamma(phi_i - psi_j + delta_ij)) * (alpha_j + delta_ij),
  /// delta_ij = theta(p_i - p_j), softmax taken per channel over the members.
  /// When `attention` is given it receives the [members, d] weights.
  void evaluate(std::size_t center, std::span<const std::size_t> members, std::span<double> out,
                Tensor* attention = nullptr) const;

 private:
  const BtParams& params_;
  const Tensor& coords_;
  Tensor phi_, psi_, alpha_;
  Tensor theta_pre_;  // coords * W_theta1^T
};

Tensor basic_transformer(const BtParams& params, const Tensor& coords, const Tensor& feats, std::size_t center,
                         std::span<const std::size_t> members);

/// Per-channel attention weights [members, d] of the same evaluation.
Tensor basic_transformer_attention(const BtParams& params, const Tensor& coords, const Tensor& feats,
                                   std::size_t center, std::span<const std::size_t> members);

}  // namespace catdet::pointformer
