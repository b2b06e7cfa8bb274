#include "catdet/fusion/cmt.hpp"

#include <algorithm>
#include <cmath>

#include "catdet/errors.hpp"
#include "catdet/numerics/eigen_view.hpp"

namespace catdet::fusion {
namespace {

using num::detail::MatrixRM;
using num::detail::view;

struct Projected {
  Tensor image;  // proj(F_I)
  Tensor qp, kp, vp, qi, ki, vi;
};

Projected project(const CmtParams& p, const Tensor& fp, const Tensor& fi) {
  p.validate();
  if (fp.rank() != 2 || fi.rank() != 2) throw ShapeError("cmt: features must be rank 2");
  if (fp.dim(0) != fi.dim(0)) {
    throw ShapeError("cmt: " + std::to_string(fp.dim(0)) + " point rows vs " + std::to_string(fi.dim(0)) +
                     " image rows");
  }
  if (fp.dim(1) != p.point_dim() || fi.dim(1) != p.image_dim()) throw ShapeError("cmt: feature widths do not match");
  Projected out;
  out.image = num::linear_forward(p.image_proj, fi);
  out.qp = num::linear_forward(p.q_point, fp);
  out.kp = num::linear_forward(p.k_point, fp);
  out.vp = num::linear_forward(p.v_point, fp);
  out.qi = num::linear_forward(p.q_image, out.image);
  out.ki = num::linear_forward(p.k_image, out.image);
  out.vi = num::linear_forward(p.v_image, out.image);
  return out;
}

double logit_scale(const CmtConfig& cfg, std::size_t d) {
  return cfg.scale_attention ? 1.0 / std::sqrt(static_cast<double>(d)) : 1.0;
}

void softmax_rows_inplace(MatrixRM& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

// softmax(q k^T * scale) v, computed in row blocks.
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v, double scale, std::size_t block) {
  const std::size_t n = q.dim(0);
  Tensor out({n, v.dim(1)});
  const auto kq = view(k);
  const auto vq = view(v);
  auto o = view(out);
  for (std::size_t r0 = 0; r0 < n; r0 += block) {
    const std::size_t rows = std::min(block, n - r0);
    MatrixRM logits = view(q).middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(rows)) *
                      kq.transpose() * scale;
    softmax_rows_inplace(logits);
    o.middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(rows)).noalias() = logits * vq;
  }
  return out;
}

Tensor attention_matrix(const Tensor& q, const Tensor& k, double scale) {
  MatrixRM logits = view(q) * view(k).transpose() * scale;
  softmax_rows_inplace(logits);
  return num::detail::to_tensor(logits);
}

}  // namespace

ImageSample sample_image_features(const Tensor& map, const std::vector<std::array<double, 2>>& pixels) {
  if (map.rank() != 3 || map.empty()) throw ShapeError("sample_image_features expects a non-empty [C, H, W] map");
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  ImageSample out;
  if (pixels.empty()) return out;
  out.features = Tensor({pixels.size(), c});
  out.out_of_bounds.assign(pixels.size(), false);
  const double umax = static_cast<double>(w - 1), vmax = static_cast<double>(h - 1);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    double u = pixels[i][0], v = pixels[i][1];
    if (!std::isfinite(u) || !std::isfinite(v)) throw NumericError("sample_image_features: non-finite pixel");
    if (u < 0.0 || v < 0.0 || u > umax || v > vmax) {
      out.out_of_bounds[i] = true;
      ++out.clamped;
      u = std::clamp(u, 0.0, umax);
      v = std::clamp(v, 0.0, vmax);
    }
    const auto x0 = static_cast<std::size_t>(std::floor(u));
    const auto y0 = static_cast<std::size_t>(std::floor(v));
    const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = u - static_cast<double>(x0), fy = v - static_cast<double>(y0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double top = (1 - fx) * map(ch, y0, x0) + fx * map(ch, y0, x1);
      const double bottom = (1 - fx) * map(ch, y1, x0) + fx * map(ch, y1, x1);
      out.features(i, ch) = (1 - fy) * top + fy * bottom;
    }
  }
  return out;
}

void CmtParams::validate() const {
  const std::size_t d = point_dim();
  for (const auto* l : {&image_proj, &q_point, &k_point, &v_point, &q_image, &k_image, &v_image, &compress}) {
    l->validate();
  }
  if (image_proj.out_dim() != d) throw ShapeError("cmt: image projection must map to the point width");
  for (const auto* l : {&q_point, &k_point, &v_point, &q_image, &k_image, &v_image}) {
    if (l->in_dim() != d || l->out_dim() != d) throw ShapeError("cmt: Q/K/V maps must be d -> d");
  }
  if (compress.in_dim() != 4 * d) throw ShapeError("cmt: compression must take 4d inputs");
}

CmtParams init_cmt(std::size_t point_dim, std::size_t image_dim, std::size_t out_dim, num::Rng& rng) {
  CmtParams p;
  p.image_proj = num::init_linear(image_dim, point_dim, rng);
  p.q_point = num::init_linear(point_dim, point_dim, rng);
  p.k_point = num::init_linear(point_dim, point_dim, rng);
  p.v_point = num::init_linear(point_dim, point_dim, rng);
  p.q_image = num::init_linear(point_dim, point_dim, rng);
  p.k_image = num::init_linear(point_dim, point_dim, rng);
  p.v_image = num::init_linear(point_dim, point_dim, rng);
  p.compress = num::init_linear(4 * point_dim, out_dim, rng);
  return p;
}

CmtOutput cmt_forward(const CmtParams& params, const Tensor& point_feats, const Tensor& image_feats,
                      const CmtConfig& cfg) {
  if (cfg.block_rows == 0) throw ArgumentError("cmt: block_rows must be positive");
  const Projected pr = project(params, point_feats, image_feats);
  const double scale = logit_scale(cfg, params.point_dim());
  CmtOutput out;
  out.point_context = attend(pr.qi, pr.kp, pr.vp, scale, cfg.block_rows);
  out.image_context = attend(pr.qp, pr.ki, pr.vi, scale, cfg.block_rows);
  const Tensor joined = concat_columns({&point_feats, &pr.image, &out.point_context, &out.image_context});
  out.output = num::linear_forward(params.compress, joined);
  return out;
}

CmtAttention cmt_attention(const CmtParams& params, const Tensor& point_feats, const Tensor& image_feats,
                           const CmtConfig& cfg) {
  const Projected pr = project(params, point_feats, image_feats);
  const double scale = logit_scale(cfg, params.point_dim());
  return {attention_matrix(pr.qi, pr.kp, scale), attention_matrix(pr.qp, pr.ki, scale)};
}

}  // namespace catdet::fusion
