#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "catdet/detection/bin_codec.hpp"

namespace catdet::detection {

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;

struct FocalOptions {
  double alpha = 0.25;
  double gamma = 2.0;
};

struct ScalarGrad {
  double value = 0;
  double grad = 0;
};

struct LossGrad {
  double value = 0;
  std::vector<double> grad;
};

/// -alpha (1 - p')^gamma log p' with p' = p for foreground and 1 - p otherwise.
/// The gradient is with respect to p and is zero where the clamp is active.
ScalarGrad focal_loss(double p, bool foreground, const FocalOptions& opt = {});

/// Sum of per-point focal losses.
LossGrad seg_loss(std::span<const double> scores, const std::vector<bool>& foreground, const FocalOptions& opt = {});

double smooth_l1(double d);
double smooth_l1_grad(double d);

/// Softmax cross-entropy of raw logits against a target index; grad is w.r.t. the logits.
LossGrad cross_entropy(std::span<const double> logits, std::size_t target);

/// -log p for label 1, -log(1 - p) for label 0, p clamped.
ScalarGrad binary_cross_entropy(double p, int label);

struct BoxLoss {
  double value = 0;
  double bin_term = 0;       // CE and smooth-L1 over x, y, theta
  double residual_term = 0;  // smooth-L1 over z, h, w, l
  std::vector<double> grad;  // same layout as the prediction
};

BoxLoss box_loss(const BinCodec& codec, std::span<const double> prediction, const BoxTargets& targets);

struct RcnnProposal {
  double prob = 0.5;
  int label = 0;
  /// Present for positives only; `box_prediction` must then follow the codec layout.
  std::optional<BoxTargets> targets;
  std::vector<double> box_prediction;
};

struct RcnnLoss {
  double value = 0;
  double classification = 0;
  double regression = 0;
  std::size_t positives = 0;
  std::vector<double> grad_prob;
  std::vector<std::vector<double>> grad_box;  // empty for proposals without targets
};

/// Mean classification CE over all proposals plus mean box loss over the
/// positives; the box term is 0 when there are no positives.
RcnnLoss rcnn_loss(const BinCodec& codec, std::span<const RcnnProposal> proposals);

struct TotalLossTerms {
  double rpn = 0;
  double rcnn = 0;
  double cl_point = 0;
  double cl_object = 0;
};

inline constexpr double kDefaultLambda = 0.15;

double total_loss(const TotalLossTerms& terms, double lambda = kDefaultLambda);

}  // namespace catdet::detection
