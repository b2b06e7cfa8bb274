#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "catdet/fusion/calibration.hpp"
#include "catdet/omda/memory_bank.hpp"
#include "catdet/pointops/point_cloud.hpp"

namespace catdet::omda {

/// One anchor row with its positive target rows. Negatives are the rows of a
/// shared group minus the anchor's `excluded` rows (kept sorted).
struct ContrastiveAnchor {
  std::size_t row = 0;
  std::vector<std::size_t> positives;
  std::size_t negative_group = 0;
  std::vector<std::size_t> excluded;
};

struct ContrastiveProblem {
  std::vector<ContrastiveAnchor> anchors;
  std::vector<std::vector<std::size_t>> negative_groups;

  std::vector<std::size_t> negatives(const ContrastiveAnchor& a) const;
  std::size_t positive_count() const;
  std::size_t negative_count() const;
};

struct InfoNceOptions {
  double tau = 0.07;
  /// Add the positive term to its own denominator (standard InfoNCE). Off by default.
  bool include_positive = false;
};

struct InfoNceResult {
  double value = 0;
  Tensor grad_anchor;  // same shape as the anchor features
  Tensor grad_target;  // same shape as the target features
};

/// L = -sum over positives (i, j) of [s_ij / tau - log sum_{k in neg(i)} exp(s_ik / tau)],
/// with s the dot product of L2-normalised rows. Gradients are with respect to
/// the unnormalised inputs. Every anchor with positives needs a negative.
InfoNceResult info_nce(const Tensor& anchor_feats, const Tensor& target_feats, const ContrastiveProblem& problem,
                       const InfoNceOptions& opt = {});

struct PointPairDiagnostics {
  std::size_t raw_anchors = 0;
  std::size_t pasted_anchors = 0;
  std::size_t dropped_out_of_image = 0;  // anchors or negatives whose projection left the image
  std::size_t skipped_no_negatives = 0;
  std::size_t skipped_no_same_class = 0;
  std::size_t excluded_overlaps = 0;  // negatives removed because they share a positive's pixel
};

/// Rows of the problem index the combined cloud (raw points, then pasted points)
/// both as anchors (point features) and as targets (image features sampled at
/// that point's projection).
struct PointPairs {
  ContrastiveProblem problem;
  std::vector<fusion::Projection> projections;
  std::vector<bool> in_image;
  PointPairDiagnostics diagnostics;

  /// No anchor has a negative pixel equal to one of its positive pixels.
  bool exclusive() const;
};

/// Raw anchors are labelled foreground points: positive at their own
/// projection, negatives at the projections of raw points scoring below
/// `threshold`. Each pasted point is an anchor with its own projection as the
/// only negative and the best-scoring raw point of its class as positive.
PointPairs build_point_pairs(const PointCloud& raw, const PointCloud& pasted, const fusion::Calibration& calib,
                             std::size_t image_width, std::size_t image_height, std::span<const double> seg_scores,
                             double threshold = 0.3);

struct BankRef {
  int class_id = 0;
  Modality modality = Modality::kPoint;
  std::size_t slot = 0;
};

struct ObjectPairs {
  /// Anchor rows: raw objects, then pasted objects. Target rows: image
  /// objects, then `bank_refs` in order.
  ContrastiveProblem problem;
  std::size_t image_objects = 0;
  std::vector<BankRef> bank_refs;
  std::size_t anchors_without_negatives = 0;
  std::size_t anchors_without_positives = 0;

  /// Image object features stacked over the referenced bank entries.
  Tensor targets(const Tensor& image_object_feats, const MemoryBank& bank) const;
  /// The problem without anchors that lack positives or negatives.
  ContrastiveProblem pruned() const;
};

/// Raw object i pairs with image object i; a pasted object pairs with every
/// image object of its class. Negatives are image objects and bank entries
/// (both queues) of other classes.
ObjectPairs build_object_pairs(std::span<const int> raw_classes, std::span<const int> pasted_classes,
                               std::span<const int> image_classes, const MemoryBank& bank);

/// Channel-wise max over the rows; `argmax`, when given, receives the winning row per channel.
std::vector<double> max_pool_rows(const Tensor& rows, std::vector<std::size_t>* argmax = nullptr);
/// Max-pool then L2-normalise.
std::vector<double> object_feature(const Tensor& rows);
/// Rows of `features` whose points lie inside `box`.
Tensor rows_in_box(const Tensor& features, const Tensor& coords, const Box3D& box);

}  // namespace catdet::omda
