#include "catdet/omda/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "catdet/errors.hpp"
#include "catdet/numerics/ops.hpp"

namespace catdet::omda {
namespace {

struct Normalised {
  Tensor unit;
  std::vector<double> norm;
};

Normalised normalise_rows(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " must be rank 2");
  Normalised out{t, std::vector<double>(t.dim(0))};
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    auto r = out.unit.row(i);
    double s = 0;
    for (double v : r) s += v * v;
    out.norm[i] = std::sqrt(s);
    if (out.norm[i] > 0.0) {
      for (double& v : r) v /= out.norm[i];
    }
  }
  return out;
}

void require_row(const Normalised& n, std::size_t row, const char* what) {
  if (row >= n.norm.size()) throw ArgumentError(std::string(what) + " row out of range");
  if (!(n.norm[row] > 0.0)) throw NumericError(std::string(what) + " row " + std::to_string(row) + " is zero");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Adds (g - f (f . g)) / |x| to the raw-input gradient row.
void backprop_normalisation(std::span<const double> f, std::span<const double> g, double norm,
                            std::span<double> out) {
  const double fg = dot(f, g);
  for (std::size_t k = 0; k < f.size(); ++k) out[k] += (g[k] - f[k] * fg) / norm;
}

using Pixel = std::pair<double, double>;

Pixel pixel_of(const fusion::Projection& p) { return {p.u, p.v}; }

}  // namespace

std::vector<std::size_t> ContrastiveProblem::negatives(const ContrastiveAnchor& a) const {
  const auto& group = negative_groups.at(a.negative_group);
  std::vector<std::size_t> out;
  out.reserve(group.size());
  for (std::size_t r : group) {
    if (!std::binary_search(a.excluded.begin(), a.excluded.end(), r)) out.push_back(r);
  }
  return out;
}

std::size_t ContrastiveProblem::positive_count() const {
  std::size_t n = 0;
  for (const auto& a : anchors) n += a.positives.size();
  return n;
}

std::size_t ContrastiveProblem::negative_count() const {
  std::size_t n = 0;
  for (const auto& a : anchors) n += negatives(a).size();
  return n;
}

InfoNceResult info_nce(const Tensor& anchor_feats, const Tensor& target_feats, const ContrastiveProblem& problem,
                       const InfoNceOptions& opt) {
  if (!(opt.tau > 0.0)) throw ArgumentError("info_nce: tau must be positive");
  const Normalised a = normalise_rows(anchor_feats, "anchor features");
  const Normalised t = normalise_rows(target_feats, "target features");
  if (anchor_feats.dim(1) != target_feats.dim(1)) throw ShapeError("info_nce: feature widths differ");
  const std::size_t d = anchor_feats.dim(1);
  const double inv_tau = 1.0 / opt.tau;

  InfoNceResult res{0.0, Tensor(anchor_feats.shape()), Tensor(target_feats.shape())};
  // Gradients with respect to the normalised rows, converted at the end.
  Tensor ga(anchor_feats.shape()), gt(target_feats.shape());
  std::vector<double> logits;

  for (const ContrastiveAnchor& anc : problem.anchors) {
    if (anc.positives.empty()) continue;
    require_row(a, anc.row, "anchor");
    const std::vector<std::size_t> negs = problem.negatives(anc);
    if (negs.empty() && !opt.include_positive) {
      throw ArgumentError("info_nce: anchor row " + std::to_string(anc.row) + " has positives but no negatives");
    }
    const auto fa = a.unit.row(anc.row);
    auto ga_row = ga.row(anc.row);

    logits.resize(negs.size());
    for (std::size_t k = 0; k < negs.size(); ++k) {
      require_row(t, negs[k], "target");
      logits[k] = dot(fa, t.unit.row(negs[k])) * inv_tau;
    }
    double m = logits.empty() ? -INFINITY : *std::max_element(logits.begin(), logits.end());

    for (std::size_t j : anc.positives) {
      require_row(t, j, "target");
      const double sp = dot(fa, t.unit.row(j)) * inv_tau;
      const double mj = opt.include_positive ? std::max(m, sp) : m;
      double z = 0;
      for (double l : logits) z += std::exp(l - mj);
      const double zp = opt.include_positive ? std::exp(sp - mj) : 0.0;
      const double total = z + zp;
      res.value += -(sp - (mj + std::log(total)));

      // d/d s_ij: -1/tau + (zp / total)/tau ; d/d s_ik: (exp(l_k - mj) / total)/tau.
      const double wp = (-1.0 + zp / total) * inv_tau;
      const auto fj = t.unit.row(j);
      auto gj = gt.row(j);
      for (std::size_t c = 0; c < d; ++c) {
        ga_row[c] += wp * fj[c];
        gj[c] += wp * fa[c];
      }
      for (std::size_t k = 0; k < negs.size(); ++k) {
        const double wk = std::exp(logits[k] - mj) / total * inv_tau;
        const auto fk = t.unit.row(negs[k]);
        auto gk = gt.row(negs[k]);
        for (std::size_t c = 0; c < d; ++c) {
          ga_row[c] += wk * fk[c];
          gk[c] += wk * fa[c];
        }
      }
    }
  }

  for (std::size_t i = 0; i < anchor_feats.dim(0); ++i) {
    if (a.norm[i] > 0.0) backprop_normalisation(a.unit.row(i), ga.row(i), a.norm[i], res.grad_anchor.row(i));
  }
  for (std::size_t i = 0; i < target_feats.dim(0); ++i) {
    if (t.norm[i] > 0.0) backprop_normalisation(t.unit.row(i), gt.row(i), t.norm[i], res.grad_target.row(i));
  }
  return res;
}

bool PointPairs::exclusive() const {
  for (const ContrastiveAnchor& a : problem.anchors) {
    std::vector<Pixel> pos;
    for (std::size_t j : a.positives) pos.push_back(pixel_of(projections[j]));
    for (std::size_t k : problem.negatives(a)) {
      if (std::find(pos.begin(), pos.end(), pixel_of(projections[k])) != pos.end()) return false;
    }
  }
  return true;
}

PointPairs build_point_pairs(const PointCloud& raw, const PointCloud& pasted, const fusion::Calibration& calib,
                             std::size_t image_width, std::size_t image_height, std::span<const double> seg_scores,
                             double threshold) {
  if (seg_scores.size() != raw.size()) throw ShapeError("build_point_pairs: scores must align with raw points");
  if (!raw.class_id) throw ArgumentError("build_point_pairs: raw points need class labels");
  if (pasted.size() > 0 && !pasted.class_id) throw ArgumentError("build_point_pairs: pasted points need class ids");
  const std::size_t n_raw = raw.size();

  PointPairs out;
  out.projections = fusion::project_points(calib, raw.coords);
  if (pasted.size() > 0) {
    const auto extra = fusion::project_points(calib, pasted.coords);
    out.projections.insert(out.projections.end(), extra.begin(), extra.end());
  }
  out.in_image.resize(out.projections.size());
  for (std::size_t i = 0; i < out.projections.size(); ++i) {
    out.in_image[i] = fusion::in_image(out.projections[i], image_width, image_height);
  }
  auto& diag = out.diagnostics;

  // Raw anchors share one negative group.
  std::vector<std::size_t> low;
  std::map<Pixel, std::vector<std::size_t>> low_by_pixel;
  for (std::size_t q = 0; q < n_raw; ++q) {
    if (seg_scores[q] >= threshold) continue;
    if (!out.in_image[q]) {
      ++diag.dropped_out_of_image;
      continue;
    }
    low.push_back(q);
    low_by_pixel[pixel_of(out.projections[q])].push_back(q);
  }
  out.problem.negative_groups.push_back(low);

  const auto& labels = *raw.class_id;
  for (std::size_t p = 0; p < n_raw; ++p) {
    if (labels[p] == kBackground) continue;
    if (!out.in_image[p]) {
      ++diag.dropped_out_of_image;
      continue;
    }
    ContrastiveAnchor anc{p, {p}, 0, {}};
    if (auto it = low_by_pixel.find(pixel_of(out.projections[p])); it != low_by_pixel.end()) {
      anc.excluded = it->second;
      diag.excluded_overlaps += anc.excluded.size();
    }
    if (low.size() == anc.excluded.size()) {
      ++diag.skipped_no_negatives;
      continue;
    }
    out.problem.anchors.push_back(std::move(anc));
    ++diag.raw_anchors;
  }

  // Best-scoring raw point per class (lowest index on ties).
  std::vector<std::ptrdiff_t> best(kNumClasses, -1);
  for (std::size_t q = 0; q < n_raw; ++q) {
    const int c = labels[q];
    if (c < 0 || c >= kNumClasses) continue;
    auto& b = best[static_cast<std::size_t>(c)];
    if (b < 0 || seg_scores[q] > seg_scores[static_cast<std::size_t>(b)]) b = static_cast<std::ptrdiff_t>(q);
  }
  for (std::size_t j = 0; j < pasted.size(); ++j) {
    const std::size_t row = n_raw + j;
    const int c = (*pasted.class_id)[j];
    if (c < 0 || c >= kNumClasses || best[static_cast<std::size_t>(c)] < 0) {
      ++diag.skipped_no_same_class;
      continue;
    }
    const auto hat = static_cast<std::size_t>(best[static_cast<std::size_t>(c)]);
    if (!out.in_image[row] || !out.in_image[hat]) {
      ++diag.dropped_out_of_image;
      continue;
    }
    if (pixel_of(out.projections[row]) == pixel_of(out.projections[hat])) {
      ++diag.excluded_overlaps;
      ++diag.skipped_no_negatives;
      continue;
    }
    out.problem.negative_groups.push_back({row});
    out.problem.anchors.push_back({row, {hat}, out.problem.negative_groups.size() - 1, {}});
    ++diag.pasted_anchors;
  }
  return out;
}

Tensor ObjectPairs::targets(const Tensor& image_object_feats, const MemoryBank& bank) const {
  const std::size_t d = bank.width();
  if (image_objects > 0 && (image_object_feats.rank() != 2 || image_object_feats.dim(0) != image_objects ||
                            image_object_feats.dim(1) != d)) {
    throw ShapeError("object pairs: image object features do not match");
  }
  const std::size_t rows = image_objects + bank_refs.size();
  if (rows == 0) return {};
  Tensor out({rows, d});
  for (std::size_t i = 0; i < image_objects; ++i) {
    std::copy_n(image_object_feats.row(i).begin(), d, out.row(i).begin());
  }
  for (std::size_t k = 0; k < bank_refs.size(); ++k) {
    const BankRef& r = bank_refs[k];
    const auto& v = bank.queue(r.class_id, r.modality).at(r.slot);
    std::copy(v.begin(), v.end(), out.row(image_objects + k).begin());
  }
  return out;
}

ContrastiveProblem ObjectPairs::pruned() const {
  ContrastiveProblem p;
  p.negative_groups = problem.negative_groups;
  for (const auto& a : problem.anchors) {
    if (!a.positives.empty() && !problem.negatives(a).empty()) p.anchors.push_back(a);
  }
  return p;
}

ObjectPairs build_object_pairs(std::span<const int> raw_classes, std::span<const int> pasted_classes,
                               std::span<const int> image_classes, const MemoryBank& bank) {
  if (raw_classes.size() != image_classes.size()) {
    throw ShapeError("build_object_pairs: raw and image objects must be aligned one to one");
  }
  const auto check = [](int c) {
    if (c < 0 || c >= kNumClasses) throw ArgumentError("build_object_pairs: unknown class " + std::to_string(c));
  };
  for (int c : raw_classes) check(c);
  for (int c : pasted_classes) check(c);
  for (int c : image_classes) check(c);

  ObjectPairs out;
  out.image_objects = image_classes.size();
  for (Modality m : {Modality::kPoint, Modality::kImage}) {
    for (int c = 0; c < kNumClasses; ++c) {
      for (std::size_t s = 0; s < bank.size(c, m); ++s) out.bank_refs.push_back({c, m, s});
    }
  }
  // Negative group per anchor class: other-class image objects and bank entries.
  out.problem.negative_groups.resize(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& g = out.problem.negative_groups[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < image_classes.size(); ++i) {
      if (image_classes[i] != c) g.push_back(i);
    }
    for (std::size_t k = 0; k < out.bank_refs.size(); ++k) {
      if (out.bank_refs[k].class_id != c) g.push_back(out.image_objects + k);
    }
  }

  const auto add_anchor = [&](std::size_t row, int cls, std::vector<std::size_t> positives) {
    ContrastiveAnchor a{row, std::move(positives), static_cast<std::size_t>(cls), {}};
    if (a.positives.empty()) ++out.anchors_without_positives;
    if (out.problem.negative_groups[static_cast<std::size_t>(cls)].empty()) ++out.anchors_without_negatives;
    out.problem.anchors.push_back(std::move(a));
  };
  for (std::size_t i = 0; i < raw_classes.size(); ++i) add_anchor(i, raw_classes[i], {i});
  for (std::size_t j = 0; j < pasted_classes.size(); ++j) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < image_classes.size(); ++i) {
      if (image_classes[i] == pasted_classes[j]) pos.push_back(i);
    }
    add_anchor(raw_classes.size() + j, pasted_classes[j], std::move(pos));
  }
  return out;
}

std::vector<double> max_pool_rows(const Tensor& rows, std::vector<std::size_t>* argmax) {
  if (rows.empty() || rows.rank() != 2) throw ArgumentError("object feature: no feature rows in the box");
  const std::size_t n = rows.dim(0), d = rows.dim(1);
  std::vector<double> out(rows.row(0).begin(), rows.row(0).end());
  std::vector<std::size_t> arg(d, 0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      if (rows(i, c) > out[c]) {
        out[c] = rows(i, c);
        arg[c] = i;
      }
    }
  }
  if (argmax) *argmax = std::move(arg);
  return out;
}

std::vector<double> object_feature(const Tensor& rows) { return num::l2_normalized(max_pool_rows(rows)); }

Tensor rows_in_box(const Tensor& features, const Tensor& coords, const Box3D& box) {
  if (features.dim(0) != coords.dim(0)) throw ShapeError("rows_in_box: features and coordinates differ in length");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < coords.dim(0); ++i) {
    if (box.contains({coords(i, 0), coords(i, 1), coords(i, 2)})) idx.push_back(i);
  }
  if (idx.empty()) return {};
  return gather_rows(features, idx);
}

}  // namespace catdet::omda
