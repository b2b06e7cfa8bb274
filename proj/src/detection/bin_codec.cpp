#include "catdet/detection/bin_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "catdet/errors.hpp"

namespace catdet::detection {
namespace {

struct Binned {
  std::size_t bin;
  double residual;
  bool clamped;
};

Binned bin_value(const BinAxis& axis, double offset) {
  const double shifted = offset + axis.extent;
  const double w = axis.width();
  const bool outside = shifted < 0.0 || shifted > 2.0 * axis.extent;
  const double raw = std::floor(shifted / w);
  const auto bin = static_cast<std::size_t>(std::clamp(raw, 0.0, static_cast<double>(axis.bins - 1)));
  double residual = (shifted - (static_cast<double>(bin) + 0.5) * w) / w;
  if (outside) residual = std::clamp(residual, -0.5, 0.5);
  return {bin, residual, outside};
}

double unbin(const BinAxis& axis, std::size_t bin, double residual) {
  return -axis.extent + (static_cast<double>(bin) + 0.5 + residual) * axis.width();
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

}  // namespace

BinCodec::BinCodec() : theta{std::numbers::pi, 12} {}

void BinCodec::validate() const {
  for (const BinAxis* axis : {&x, &y, &theta}) {
    if (axis->bins == 0 || !(axis->extent > 0.0)) throw ArgumentError("bin codec axes need a positive extent and bin count");
  }
  for (const auto& a : anchors) {
    if (!(a.h > 0 && a.w > 0 && a.l > 0)) throw ArgumentError("bin codec anchor sizes must be positive");
  }
}

const AnchorSize& BinCodec::anchor(int class_id) const {
  if (class_id < 0 || class_id >= kNumClasses) throw ArgumentError("bin codec: no anchor size for class " + std::to_string(class_id));
  return anchors[static_cast<std::size_t>(class_id)];
}

BoxTargets encode_box(const BinCodec& codec, const Box3D& gt, const std::array<double, 3>& anchor) {
  codec.validate();
  gt.validate();
  const AnchorSize& size = codec.anchor(gt.class_id);
  BoxTargets t;
  const Binned bx = bin_value(codec.x, gt.x - anchor[0]);
  const Binned by = bin_value(codec.y, gt.y - anchor[1]);
  const Binned bt = bin_value(codec.theta, normalize_angle(gt.theta));
  t.bin_x = bx.bin;
  t.res_x = bx.residual;
  t.bin_y = by.bin;
  t.res_y = by.residual;
  t.bin_theta = bt.bin;
  t.res_theta = bt.residual;
  t.clamped = bx.clamped || by.clamped;
  t.res_z = gt.z - anchor[2];
  t.res_h = (gt.h - size.h) / size.h;
  t.res_w = (gt.w - size.w) / size.w;
  t.res_l = (gt.l - size.l) / size.l;
  return t;
}

Box3D decode_box(const BinCodec& codec, const BoxTargets& t, const std::array<double, 3>& anchor, int class_id) {
  const AnchorSize& size = codec.anchor(class_id);
  Box3D b;
  b.x = anchor[0] + unbin(codec.x, t.bin_x, t.res_x);
  b.y = anchor[1] + unbin(codec.y, t.bin_y, t.res_y);
  b.theta = normalize_angle(unbin(codec.theta, t.bin_theta, t.res_theta));
  b.z = anchor[2] + t.res_z;
  b.h = size.h * (1.0 + t.res_h);
  b.w = size.w * (1.0 + t.res_w);
  b.l = size.l * (1.0 + t.res_l);
  b.class_id = class_id;
  return b;
}

Box3D decode_prediction(const BinCodec& codec, std::span<const double> prediction, const std::array<double, 3>& anchor,
                        int class_id) {
  if (prediction.size() != codec.layout_size()) throw ShapeError("decode_prediction: layout size mismatch");
  BoxTargets t;
  t.bin_x = argmax(prediction.subspan(codec.x_offset(), codec.x.bins));
  t.bin_y = argmax(prediction.subspan(codec.y_offset(), codec.y.bins));
  t.bin_theta = argmax(prediction.subspan(codec.theta_offset(), codec.theta.bins));
  const auto r = prediction.subspan(codec.residual_offset(), 7);
  t.res_x = r[0];
  t.res_y = r[1];
  t.res_theta = r[2];
  t.res_z = r[3];
  t.res_h = std::max(r[4], -0.9);
  t.res_w = std::max(r[5], -0.9);
  t.res_l = std::max(r[6], -0.9);
  return decode_box(codec, t, anchor, class_id);
}

std::vector<double> prediction_from_targets(const BinCodec& codec, const BoxTargets& t, double margin) {
  std::vector<double> p(codec.layout_size(), 0.0);
  p[codec.x_offset() + t.bin_x] = margin;
  p[codec.y_offset() + t.bin_y] = margin;
  p[codec.theta_offset() + t.bin_theta] = margin;
  const auto r = t.residuals();
  std::copy(r.begin(), r.end(), p.begin() + static_cast<std::ptrdiff_t>(codec.residual_offset()));
  return p;
}

}  // namespace catdet::detection
