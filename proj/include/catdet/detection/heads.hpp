#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "catdet/detection/bin_codec.hpp"
#include "catdet/numerics/ops.hpp"
#include "catdet/pointops/point_cloud.hpp"
#include "catdet/pointops/set_abstraction.hpp"

namespace catdet::detection {

/// Two fully connected layers with a ReLU between them, then a sigmoid.
struct SegHeadParams {
  num::LinearParams fc1;  // d -> hidden
  num::LinearParams fc2;  // hidden -> 1
};

SegHeadParams init_seg_head(std::size_t in_dim, std::size_t hidden, num::Rng& rng);

struct SegHeadTrace {
  Tensor hidden_pre;  // fc1 output before ReLU
  Tensor hidden;
  std::vector<double> logits;
};

/// Per-point foreground scores for [N, d] features.
std::vector<double> seg_head_forward(const SegHeadParams& p, const Tensor& features, SegHeadTrace* trace = nullptr);

/// Per-point proposal generation: a foreground logit and a codec-layout box prediction.
struct ProposalHeadParams {
  num::LinearParams cls;  // d -> 1
  num::LinearParams reg;  // d -> layout
};

ProposalHeadParams init_proposal_head(std::size_t in_dim, const BinCodec& codec, num::Rng& rng);

struct ProposalHeadOutput {
  std::vector<double> probs;
  Tensor predictions;  // [N, layout]
};

ProposalHeadOutput proposal_head_forward(const ProposalHeadParams& p, const Tensor& features);

struct RefineHeadConfig {
  std::size_t max_points = 512;
  std::array<pointops::SetAbstractionSpec, 3> sa{pointops::SetAbstractionSpec{128, 0.8, 16, 0},
                                                 pointops::SetAbstractionSpec{32, 1.6, 16, 0},
                                                 pointops::SetAbstractionSpec{1, 100.0, 32, 0}};
  std::array<std::size_t, 3> widths{64, 128, 128};
  /// Added to every half-extent when gathering the proposal's points.
  double margin = 0.5;
};

struct RefineHeadParams {
  std::array<num::MlpParams, 3> sa;
  num::LinearParams cls;  // width -> 1
  num::LinearParams reg;  // width -> layout
};

RefineHeadParams init_refine_head(const RefineHeadConfig& cfg, std::size_t in_dim, const BinCodec& codec,
                                  num::Rng& rng);

struct RefineOutput {
  double prob = 0;
  std::vector<double> box_prediction;  // codec layout, anchored at the proposal centre
  std::vector<double> pooled;          // global feature after the third SA layer
  std::size_t points_used = 0;
};

struct RefineDiagnostics {
  std::size_t empty_proposals = 0;
  std::size_t subsampled = 0;
};

/// Gathers the points inside the (enlarged) proposal, keeps at most
/// `max_points` of them (seeded, without replacement), moves them into the
/// proposal frame and runs three SA layers and the two heads. Returns nullopt
/// for a proposal with no points.
std::optional<RefineOutput> refine_head_forward(const RefineHeadConfig& cfg, const RefineHeadParams& params,
                                                const Box3D& proposal, const PointCloud& scene, std::uint64_t seed,
                                                RefineDiagnostics* diagnostics = nullptr);

/// Only the classification and regression heads applied to a pooled feature.
RefineOutput refine_heads(const RefineHeadParams& params, std::span<const double> pooled);

}  // namespace catdet::detection
