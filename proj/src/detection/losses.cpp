#include "catdet/detection/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catdet/errors.hpp"
#include "catdet/numerics/ops.hpp"

namespace catdet::detection {

ScalarGrad focal_loss(double p, bool foreground, const FocalOptions& opt) {
  if (!std::isfinite(p)) throw NumericError("focal_loss: non-finite probability");
  const double pt_raw = foreground ? p : 1.0 - p;
  const double pt = std::clamp(pt_raw, kProbFloor, 1.0 - kProbFloor);
  const double q = 1.0 - pt;
  const double log_pt = std::log(pt);
  ScalarGrad out;
  out.value = -opt.alpha * std::pow(q, opt.gamma) * log_pt;
  if (pt_raw > kProbFloor && pt_raw < 1.0 - kProbFloor) {
    const double dpow = opt.gamma == 0.0 ? 0.0 : opt.gamma * std::pow(q, opt.gamma - 1.0);
    const double d_pt = opt.alpha * (dpow * log_pt - std::pow(q, opt.gamma) / pt);
    out.grad = foreground ? d_pt : -d_pt;
  }
  return out;
}

LossGrad seg_loss(std::span<const double> scores, const std::vector<bool>& foreground, const FocalOptions& opt) {
  if (scores.size() != foreground.size()) {
    throw ShapeError("seg_loss: " + std::to_string(scores.size()) + " scores but " +
                     std::to_string(foreground.size()) + " labels");
  }
  LossGrad out;
  out.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const ScalarGrad f = focal_loss(scores[i], foreground[i], opt);
    out.value += f.value;
    out.grad[i] = f.grad;
  }
  return out;
}

double smooth_l1(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double smooth_l1_grad(double d) {
  if (std::abs(d) < 1.0) return d;
  return d > 0 ? 1.0 : -1.0;
}

LossGrad cross_entropy(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) throw ArgumentError("cross_entropy: target bin out of range");
  const std::vector<double> p = num::softmax(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (double l : logits) z += std::exp(l - m);
  LossGrad out;
  out.value = -(logits[target] - m - std::log(z));
  out.grad = p;
  out.grad[target] -= 1.0;
  return out;
}

ScalarGrad binary_cross_entropy(double p, int label) {
  if (label != 0 && label != 1) throw ArgumentError("binary_cross_entropy: label must be 0 or 1");
  const double pt_raw = label == 1 ? p : 1.0 - p;
  const double pt = std::clamp(pt_raw, kProbFloor, 1.0 - kProbFloor);
  ScalarGrad out;
  out.value = -std::log(pt);
  if (pt_raw > kProbFloor && pt_raw < 1.0 - kProbFloor) out.grad = label == 1 ? -1.0 / pt : 1.0 / pt;
  return out;
}

BoxLoss box_loss(const BinCodec& codec, std::span<const double> prediction, const BoxTargets& targets) {
  if (prediction.size() != codec.layout_size()) {
    throw ShapeError("box_loss: prediction has " + std::to_string(prediction.size()) + " values, layout needs " +
                     std::to_string(codec.layout_size()));
  }
  BoxLoss out;
  out.grad.assign(prediction.size(), 0.0);

  const struct {
    std::size_t offset, bins, target;
  } binned[3] = {{codec.x_offset(), codec.x.bins, targets.bin_x},
                 {codec.y_offset(), codec.y.bins, targets.bin_y},
                 {codec.theta_offset(), codec.theta.bins, targets.bin_theta}};
  for (const auto& b : binned) {
    const LossGrad ce = cross_entropy(prediction.subspan(b.offset, b.bins), b.target);
    out.bin_term += ce.value;
    std::copy(ce.grad.begin(), ce.grad.end(), out.grad.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }

  const std::size_t r0 = codec.residual_offset();
  const auto res = targets.residuals();
  for (std::size_t k = 0; k < 7; ++k) {
    const double d = prediction[r0 + k] - res[k];
    (k < 3 ? out.bin_term : out.residual_term) += smooth_l1(d);
    out.grad[r0 + k] = smooth_l1_grad(d);
  }
  out.value = out.bin_term + out.residual_term;
  return out;
}

RcnnLoss rcnn_loss(const BinCodec& codec, std::span<const RcnnProposal> proposals) {
  if (proposals.empty()) throw ArgumentError("rcnn_loss: no proposals");
  RcnnLoss out;
  const double inv_b = 1.0 / static_cast<double>(proposals.size());
  for (const auto& p : proposals) {
    if (p.targets) ++out.positives;
  }
  const double inv_pos = out.positives ? 1.0 / static_cast<double>(out.positives) : 0.0;

  out.grad_prob.resize(proposals.size());
  out.grad_box.resize(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const RcnnProposal& p = proposals[i];
    const ScalarGrad ce = binary_cross_entropy(p.prob, p.label);
    out.classification += ce.value * inv_b;
    out.grad_prob[i] = ce.grad * inv_b;
    if (p.targets) {
      BoxLoss b = box_loss(codec, p.box_prediction, *p.targets);
      out.regression += b.value * inv_pos;
      for (double& g : b.grad) g *= inv_pos;
      out.grad_box[i] = std::move(b.grad);
    }
  }
  out.value = out.classification + out.regression;
  return out;
}

double total_loss(const TotalLossTerms& t, double lambda) {
  for (double v : {t.rpn, t.rcnn, t.cl_point, t.cl_object, lambda}) {
    if (!std::isfinite(v)) throw NumericError("total_loss: non-finite component");
  }
  return t.rpn + t.rcnn + lambda * (t.cl_point + t.cl_object);
}

}  // namespace catdet::detection
