#include "catdet/detection/heads.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "catdet/errors.hpp"
#include "catdet/numerics/train.hpp"

namespace catdet::detection {

SegHeadParams init_seg_head(std::size_t in_dim, std::size_t hidden, num::Rng& rng) {
  return {num::init_linear(in_dim, hidden, rng), num::init_linear(hidden, 1, rng)};
}

std::vector<double> seg_head_forward(const SegHeadParams& p, const Tensor& features, SegHeadTrace* trace) {
  if (features.rank() != 2) throw ShapeError("seg head expects [N, d] features");
  Tensor pre = num::linear_forward(p.fc1, features);
  Tensor hidden = num::relu(pre);
  const Tensor logits = num::linear_forward(p.fc2, hidden);
  std::vector<double> scores(logits.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = num::sigmoid(logits[i]);
  if (trace) {
    trace->hidden_pre = std::move(pre);
    trace->hidden = std::move(hidden);
    trace->logits.assign(logits.data().begin(), logits.data().end());
  }
  return scores;
}

ProposalHeadParams init_proposal_head(std::size_t in_dim, const BinCodec& codec, num::Rng& rng) {
  return {num::init_linear(in_dim, 1, rng), num::init_linear(in_dim, codec.layout_size(), rng)};
}

ProposalHeadOutput proposal_head_forward(const ProposalHeadParams& p, const Tensor& features) {
  ProposalHeadOutput out;
  const Tensor logits = num::linear_forward(p.cls, features);
  out.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.probs[i] = num::sigmoid(logits[i]);
  out.predictions = num::linear_forward(p.reg, features);
  return out;
}

RefineHeadParams init_refine_head(const RefineHeadConfig& cfg, std::size_t in_dim, const BinCodec& codec,
                                  num::Rng& rng) {
  RefineHeadParams p;
  std::size_t width = in_dim;
  for (std::size_t i = 0; i < 3; ++i) {
    p.sa[i] = num::init_mlp(3 + width, cfg.widths[i], cfg.widths[i], rng);
    width = cfg.widths[i];
  }
  p.cls = num::init_linear(width, 1, rng);
  p.reg = num::init_linear(width, codec.layout_size(), rng);
  return p;
}

RefineOutput refine_heads(const RefineHeadParams& params, std::span<const double> pooled) {
  const Tensor g = Tensor::vector({pooled.begin(), pooled.end()});
  RefineOutput out;
  out.prob = num::sigmoid(num::linear_forward(params.cls, g)[0]);
  const Tensor box = num::linear_forward(params.reg, g);
  out.box_prediction.assign(box.data().begin(), box.data().end());
  out.pooled.assign(pooled.begin(), pooled.end());
  return out;
}

std::optional<RefineOutput> refine_head_forward(const RefineHeadConfig& cfg, const RefineHeadParams& params,
                                                const Box3D& proposal, const PointCloud& scene, std::uint64_t seed,
                                                RefineDiagnostics* diagnostics) {
  if (!scene.features) throw ArgumentError("refine head needs per-point features");
  if (cfg.max_points == 0) throw ArgumentError("refine head: max_points must be positive");
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (proposal.contains(scene.point(i), cfg.margin)) inside.push_back(i);
  }
  if (inside.empty()) {
    if (diagnostics) ++diagnostics->empty_proposals;
    return std::nullopt;
  }
  if (inside.size() > cfg.max_points) {
    std::mt19937_64 rng(seed);
    std::shuffle(inside.begin(), inside.end(), rng);
    inside.resize(cfg.max_points);
    std::sort(inside.begin(), inside.end());
    if (diagnostics) ++diagnostics->subsampled;
  }

  PointCloud local;
  local.coords = Tensor({inside.size(), 3});
  for (std::size_t i = 0; i < inside.size(); ++i) {
    const auto q = proposal.to_local(scene.point(inside[i]));
    for (std::size_t k = 0; k < 3; ++k) local.coords(i, k) = q[k];
  }
  local.features = gather_rows(*scene.features, inside);

  for (std::size_t l = 0; l < 3; ++l) {
    pointops::SetAbstractionSpec spec = cfg.sa[l];
    spec.centroids = std::min(spec.centroids, local.size());
    local = pointops::set_abstraction(local, spec, params.sa[l]);
  }
  std::vector<double> pooled(local.features->row(0).begin(), local.features->row(0).end());
  for (std::size_t i = 1; i < local.size(); ++i) {
    const auto r = local.features->row(i);
    for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] = std::max(pooled[c], r[c]);
  }
  RefineOutput out = refine_heads(params, pooled);
  out.points_used = inside.size();
  return out;
}

}  // namespace catdet::detection
