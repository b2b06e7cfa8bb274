#pragma once

#include <cstddef>
#include <vector>

#include "catdet/numerics/ops.hpp"

namespace catdet::imageformer {

struct EncoderParams {
  num::LinearParams query, key, value, output;  // each D -> D
  std::size_t dim() const { return query.in_dim(); }
};

EncoderParams init_encoder(std::size_t dim, num::Rng& rng);

/// tokens + output(concat_h softmax(Q_h K_h^T / sqrt(D/heads)) V_h).
Tensor multihead_encoder(const Tensor& tokens, std::size_t heads, const EncoderParams& params);

/// The per-head [T,T] attention matrices of the same computation.
std::vector<Tensor> multihead_attention_weights(const Tensor& tokens, std::size_t heads, const EncoderParams& params);

}  // namespace catdet::imageformer
