#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "catdet/detection/box3d.hpp"

namespace catdet::detection {

/// Uniform bins over [-extent, extent].
struct BinAxis {
  double extent = 1.5;
  std::size_t bins = 6;
  double width() const { return 2.0 * extent / static_cast<double>(bins); }
};

struct AnchorSize {
  double h = 1, w = 1, l = 1;
};

/// Bin-based box encoding. x and y are binned relative to an anchor centre,
/// theta is binned absolutely over (-pi, pi]; z is a plain offset and h, w, l
/// are residuals normalised by the class anchor size.
///
/// Prediction layout: [x logits | y logits | theta logits | res x, y, theta, z, h, w, l].
struct BinCodec {
  BinAxis x{1.5, 6};
  BinAxis y{1.5, 6};
  BinAxis theta;  // extent pi, 12 bins
  std::array<AnchorSize, kNumClasses> anchors{
      AnchorSize{1.53, 1.63, 3.88}, AnchorSize{1.76, 0.66, 0.84}, AnchorSize{1.74, 0.60, 1.76}};

  BinCodec();
  void validate() const;
  std::size_t layout_size() const { return x.bins + y.bins + theta.bins + 7; }
  std::size_t x_offset() const { return 0; }
  std::size_t y_offset() const { return x.bins; }
  std::size_t theta_offset() const { return x.bins + y.bins; }
  std::size_t residual_offset() const { return x.bins + y.bins + theta.bins; }
  const AnchorSize& anchor(int class_id) const;
};

/// Residuals of binned axes are in bin widths, within [-0.5, 0.5].
struct BoxTargets {
  std::size_t bin_x = 0, bin_y = 0, bin_theta = 0;
  double res_x = 0, res_y = 0, res_theta = 0;
  double res_z = 0, res_h = 0, res_w = 0, res_l = 0;
  /// Set when the centre fell outside the search range and was clamped to a boundary bin.
  bool clamped = false;

  std::array<double, 7> residuals() const { return {res_x, res_y, res_theta, res_z, res_h, res_w, res_l}; }
};

BoxTargets encode_box(const BinCodec& codec, const Box3D& gt, const std::array<double, 3>& anchor);
Box3D decode_box(const BinCodec& codec, const BoxTargets& targets, const std::array<double, 3>& anchor,
                 int class_id);
/// Decodes a raw prediction vector by arg-max bins and the predicted residuals.
Box3D decode_prediction(const BinCodec& codec, std::span<const double> prediction,
                        const std::array<double, 3>& anchor, int class_id);
/// The prediction vector that decodes exactly to `targets` (one-hot logits of the given margin).
std::vector<double> prediction_from_targets(const BinCodec& codec, const BoxTargets& targets, double margin = 10.0);

}  // namespace catdet::detection
