#include "catdet/imageformer/encoder.hpp"

#include <cmath>

#include "catdet/errors.hpp"
#include "catdet/numerics/eigen_view.hpp"

namespace catdet::imageformer {

using num::detail::MatrixRM;
using num::detail::view;

EncoderParams init_encoder(std::size_t dim, num::Rng& rng) {
  return EncoderParams{num::init_linear(dim, dim, rng), num::init_linear(dim, dim, rng),
                       num::init_linear(dim, dim, rng), num::init_linear(dim, dim, rng)};
}

namespace {

struct Projected {
  Tensor q, k, v;
  std::size_t head_dim;
};

Projected project(const Tensor& tokens, std::size_t heads, const EncoderParams& params) {
  if (tokens.rank() != 2 || tokens.dim(1) != params.dim()) {
    throw ShapeError("multihead_encoder: tokens " + tokens.shape_string() + " do not match width " +
                     std::to_string(params.dim()));
  }
  if (heads == 0 || params.dim() % heads != 0) {
    throw ShapeError("multihead_encoder: width " + std::to_string(params.dim()) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  return Projected{num::linear_forward(params.query, tokens), num::linear_forward(params.key, tokens),
                   num::linear_forward(params.value, tokens), params.dim() / heads};
}

MatrixRM head_weights(const Projected& p, std::size_t h) {
  const auto offset = static_cast<Eigen::Index>(h * p.head_dim);
  const auto width = static_cast<Eigen::Index>(p.head_dim);
  MatrixRM logits = view(p.q).middleCols(offset, width) * view(p.k).middleCols(offset, width).transpose();
  logits /= std::sqrt(static_cast<double>(p.head_dim));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    logits.row(r).array() -= logits.row(r).maxCoeff();
    logits.row(r) = logits.row(r).array().exp().matrix();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

}  // namespace

Tensor multihead_encoder(const Tensor& tokens, std::size_t heads, const EncoderParams& params) {
  const Projected p = project(tokens, heads, params);
  Tensor mixed(tokens.shape());
  for (std::size_t h = 0; h < heads; ++h) {
    const auto offset = static_cast<Eigen::Index>(h * p.head_dim);
    const auto width = static_cast<Eigen::Index>(p.head_dim);
    view(mixed).middleCols(offset, width).noalias() = head_weights(p, h) * view(p.v).middleCols(offset, width);
  }
  Tensor out = num::linear_forward(params.output, mixed);
  view(out) += view(tokens);
  out.check_finite("multihead_encoder");
  return out;
}

std::vector<Tensor> multihead_attention_weights(const Tensor& tokens, std::size_t heads, const EncoderParams& params) {
  const Projected p = project(tokens, heads, params);
  std::vector<Tensor> out;
  for (std::size_t h = 0; h < heads; ++h) out.push_back(num::detail::to_tensor(head_weights(p, h)));
  return out;
}

}  // namespace catdet::imageformer
