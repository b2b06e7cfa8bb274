#include "catdet/pipeline/overfit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "catdet/detection/heads.hpp"
#include "catdet/detection/losses.hpp"
#include "catdet/errors.hpp"
#include "catdet/fusion/two_stream.hpp"
#include "catdet/numerics/train.hpp"
#include "catdet/omda/contrastive.hpp"
#include "catdet/omda/gt_paste.hpp"

namespace catdet::pipeline {
namespace {

using detection::BinCodec;
using num::LinearGrad;
using num::LinearParams;

struct Linear {
  LinearParams p;
  LinearGrad g;
  void reset() { g = num::zero_grad(p); }
};

// One object for the object-level loss: its point rows and, for raw objects,
// the image feature rows inside its 2D box.
struct ObjectRows {
  int class_id = 0;
  std::vector<std::size_t> point_rows;
  Tensor image_rows;  // [m, C], raw objects only
};

std::vector<double> sigmoid_all(const Tensor& logits) {
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = num::sigmoid(logits[i]);
  return p;
}

Tensor column(const std::vector<double>& v) { return Tensor({v.size(), 1}, v); }

// Pools rows of `feats` and routes a pooled gradient back through the argmax.
struct Pooled {
  std::vector<double> value;
  std::vector<std::size_t> argmax;
};

Pooled pool(const Tensor& feats) {
  Pooled p;
  p.value = omda::max_pool_rows(feats, &p.argmax);
  return p;
}

Tensor image_rows_in_bbox(const Tensor& map, const std::array<double, 4>& bbox) {
  const std::size_t h = map.dim(1), w = map.dim(2), c = map.dim(0);
  const auto c0 = static_cast<std::size_t>(std::clamp(std::floor(bbox[0]), 0.0, static_cast<double>(w - 1)));
  const auto c1 = static_cast<std::size_t>(std::clamp(std::floor(bbox[2]), 0.0, static_cast<double>(w - 1)));
  const auto r0 = static_cast<std::size_t>(std::clamp(std::floor(bbox[1]), 0.0, static_cast<double>(h - 1)));
  const auto r1 = static_cast<std::size_t>(std::clamp(std::floor(bbox[3]), 0.0, static_cast<double>(h - 1)));
  Tensor out({(r1 - r0 + 1) * (c1 - c0 + 1), c});
  std::size_t k = 0;
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t col = c0; col <= c1; ++col, ++k) {
      for (std::size_t ch = 0; ch < c; ++ch) out(k, ch) = map(ch, r, col);
    }
  }
  return out;
}

}  // namespace

OverfitReport run_overfit(const OverfitOptions& opt, const std::function<void(const StepRecord&)>& on_step) {
  const auto t0 = std::chrono::steady_clock::now();
  const kitti::RunConfig& cfg = opt.config;
  if (opt.lr <= 0.0 || opt.projector_lr <= 0.0 || opt.projection_dim == 0 || opt.seg_hidden == 0) throw ArgumentError("overfit: bad options");
  cfg.model.validate();

  // Scene, donor database and GT-Paste.
  const kitti::Frame frame = kitti::generate_synthetic(cfg.scene);
  kitti::SyntheticSceneSpec donor_spec = cfg.scene;
  donor_spec.seed = cfg.scene.seed + 1;
  const kitti::Frame donor = kitti::generate_synthetic(donor_spec);
  std::vector<omda::ObjectSample> db;
  for (const Box3D& b : kitti::target_boxes(donor.labels)) db.push_back(omda::crop_object(donor.cloud, b, "donor"));
  const std::vector<Box3D> raw_boxes = kitti::target_boxes(frame.labels);
  const omda::PasteResult pasted = omda::gt_paste({frame.cloud, raw_boxes}, db, {cfg.max_paste, cfg.seed});

  const std::vector<std::size_t> keep =
      kitti::resample_indices(pasted.scene.cloud.size(), cfg.model.point.root_points, cfg.seed);
  const PointCloud cloud = select_points(pasted.scene.cloud, keep);
  const std::size_t n = cloud.size();
  const auto n_raw = static_cast<std::size_t>(
      std::count_if(keep.begin(), keep.end(), [&](std::size_t i) { return i < pasted.record.first_point; }));
  const std::vector<int>& labels = *cloud.class_id;
  std::vector<bool> fg(n);
  for (std::size_t i = 0; i < n; ++i) fg[i] = labels[i] != kBackground;

  // Frozen backbone.
  num::Rng rng(cfg.seed);
  const fusion::TwoStreamParams backbone = fusion::init_two_stream(cfg.model, rng);
  const fusion::TwoStreamOutput fwd = fusion::two_stream_forward(cfg.model, backbone, cloud, frame.image, frame.calib);
  const Tensor& feats = fwd.features;
  const Tensor& image_map = fwd.image.fused;
  const std::size_t d = feats.dim(1), ci = image_map.dim(0);

  std::vector<std::array<double, 2>> pixels(n);
  const auto proj = fusion::project_points(frame.calib, cloud.coords);
  for (std::size_t i = 0; i < n; ++i) pixels[i] = {proj[i].u, proj[i].v};
  const Tensor point_image_feats = fusion::sample_image_features(image_map, pixels).features;

  // Point pairs from label-derived scores.
  std::vector<std::size_t> raw_idx(n_raw), pasted_idx(n - n_raw);
  for (std::size_t i = 0; i < n; ++i) (i < n_raw ? raw_idx[i] : pasted_idx[i - n_raw]) = i;
  std::vector<double> label_scores(n_raw);
  for (std::size_t i = 0; i < n_raw; ++i) label_scores[i] = fg[i] ? 1.0 : 0.0;
  const omda::PointPairs point_pairs = omda::build_point_pairs(
      select_points(cloud, raw_idx), pasted_idx.empty() ? PointCloud{} : select_points(cloud, pasted_idx), frame.calib,
      frame.image_width(), frame.image_height(), label_scores, cfg.threshold);

  // Objects with at least one sampled point; raw ones keep their image box.
  std::vector<ObjectRows> raw_objects, pasted_objects;
  const auto rows_in = [&](const Box3D& b) {
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == b.class_id && b.contains(cloud.point(i))) r.push_back(i);
    }
    return r;
  };
  for (const kitti::Label& l : frame.labels) {
    if (l.excluded) continue;
    ObjectRows o{l.box.class_id, rows_in(l.box), image_rows_in_bbox(image_map, l.bbox)};
    if (!o.point_rows.empty()) raw_objects.push_back(std::move(o));
  }
  for (const Box3D& b : pasted.record.pasted) {
    ObjectRows o{b.class_id, rows_in(b), {}};
    if (!o.point_rows.empty()) pasted_objects.push_back(std::move(o));
  }
  std::vector<int> raw_classes, pasted_classes;
  for (const auto& o : raw_objects) raw_classes.push_back(o.class_id);
  for (const auto& o : pasted_objects) pasted_classes.push_back(o.class_id);

  // Targets for the per-point proposal loss.
  const BinCodec codec;
  const auto box_of = [&](std::size_t i) -> const Box3D* {
    for (const Box3D& b : pasted.scene.boxes) {
      if (b.class_id == labels[i] && b.contains(cloud.point(i))) return &b;
    }
    return nullptr;
  };
  std::vector<std::optional<detection::BoxTargets>> pg_targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (const Box3D* b = fg[i] ? box_of(i) : nullptr) pg_targets[i] = detection::encode_box(codec, *b, cloud.point(i));
  }

  // Trainable parameters.
  detection::SegHeadParams seg_init = detection::init_seg_head(d, opt.seg_hidden, rng);
  Linear seg1{seg_init.fc1, {}}, seg2{seg_init.fc2, {}};
  detection::ProposalHeadParams pg_init = detection::init_proposal_head(d, codec, rng);
  Linear pg_cls{pg_init.cls, {}}, pg_reg{pg_init.reg, {}};
  const detection::RefineHeadConfig refine_cfg;
  const detection::RefineHeadParams refine_init = detection::init_refine_head(refine_cfg, d, codec, rng);
  Linear rc_cls{refine_init.cls, {}}, rc_reg{refine_init.reg, {}};
  Linear proj_p{num::init_linear(d, opt.projection_dim, rng), {}};
  Linear proj_i{num::init_linear(ci, opt.projection_dim, rng), {}};
  LinearParams key_p = proj_p.p, key_i = proj_i.p;
  std::vector<Linear*> heads{&seg1, &seg2, &pg_cls, &pg_reg, &rc_cls, &rc_reg};
  std::vector<Linear*> projectors{&proj_p, &proj_i};

  // Fixed refinement proposals: the point nearest each box centre, then the
  // highest initial segmentation scores.
  std::vector<std::size_t> proposal_points;
  for (const Box3D& b : pasted.scene.boxes) {
    double best = INFINITY;
    std::size_t arg = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!b.contains(cloud.point(i))) continue;
      const double dist = std::hypot(cloud.coords(i, 0) - b.x, cloud.coords(i, 1) - b.y);
      if (dist < best) best = dist, arg = i;
    }
    if (arg < n) proposal_points.push_back(arg);
  }
  {
    const std::vector<double> s0 =
        sigmoid_all(num::linear_forward(seg2.p, num::relu(num::linear_forward(seg1.p, feats))));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s0[a] > s0[b]; });
    std::size_t added = 0;
    for (std::size_t i : order) {
      if (added == opt.extra_proposals) break;
      if (std::find(proposal_points.begin(), proposal_points.end(), i) != proposal_points.end()) continue;
      proposal_points.push_back(i);
      ++added;
    }
  }
  PointCloud scene_feats;
  scene_feats.coords = cloud.coords;
  scene_feats.features = feats;
  std::vector<std::vector<double>> pooled_rows;
  std::vector<detection::RcnnProposal> proposals;
  for (std::size_t k = 0; k < proposal_points.size(); ++k) {
    const std::size_t i = proposal_points[k];
    const Box3D* gt = fg[i] ? box_of(i) : nullptr;
    const int cls = gt ? gt->class_id : kCar;
    const auto& a = codec.anchor(cls);
    const Box3D proposal{cloud.coords(i, 0), cloud.coords(i, 1), cloud.coords(i, 2), a.h, a.w, a.l, 0.0, cls, 1.0};
    const auto out = detection::refine_head_forward(refine_cfg, refine_init, proposal, scene_feats, cfg.seed + k);
    if (!out) continue;
    pooled_rows.push_back(out->pooled);
    detection::RcnnProposal p;
    p.label = gt ? 1 : 0;
    if (gt) p.targets = detection::encode_box(codec, *gt, cloud.point(i));
    proposals.push_back(std::move(p));
  }
  if (proposals.empty()) throw Error("overfit: no refinement proposal has points");
  Tensor pooled({pooled_rows.size(), pooled_rows[0].size()});
  for (std::size_t k = 0; k < pooled_rows.size(); ++k) std::copy(pooled_rows[k].begin(), pooled_rows[k].end(), pooled.row(k).begin());

  omda::MemoryBank bank(opt.projection_dim);
  num::Adam head_adam(opt.lr), projector_adam(opt.projector_lr);
  OverfitReport report;
  report.points = n;
  report.pasted_points = n - n_raw;
  report.pasted_objects = pasted.record.pasted.size();
  report.point_anchors = point_pairs.problem.anchors.size();
  report.proposals = proposals.size();

  for (std::size_t step = 0; step <= opt.steps; ++step) {
    for (Linear* l : heads) l->reset();
    for (Linear* l : projectors) l->reset();
    StepRecord rec;
    rec.step = step;

    // Segmentation head.
    const Tensor seg_pre = num::linear_forward(seg1.p, feats);
    const Tensor seg_hidden = num::relu(seg_pre);
    const std::vector<double> scores = sigmoid_all(num::linear_forward(seg2.p, seg_hidden));
    const detection::LossGrad seg = detection::seg_loss(scores, fg);
    rec.seg = seg.value;
    std::size_t correct = 0;
    std::vector<double> dz(n);
    for (std::size_t i = 0; i < n; ++i) {
      correct += (scores[i] >= 0.5) == fg[i];
      dz[i] = seg.grad[i] * scores[i] * (1 - scores[i]);
    }
    rec.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    num::linear_backward(seg1.p, feats, num::relu_backward(seg_pre, num::linear_backward(seg2.p, seg_hidden, column(dz), seg2.g)),
                         seg1.g);

    // Per-point proposal loss.
    const std::vector<double> pg_probs = sigmoid_all(num::linear_forward(pg_cls.p, feats));
    const Tensor pg_pred = num::linear_forward(pg_reg.p, feats);
    std::vector<detection::RcnnProposal> pg_props(n);
    for (std::size_t i = 0; i < n; ++i) {
      pg_props[i].prob = pg_probs[i];
      pg_props[i].label = fg[i] ? 1 : 0;
      if (pg_targets[i]) {
        pg_props[i].targets = pg_targets[i];
        pg_props[i].box_prediction.assign(pg_pred.row(i).begin(), pg_pred.row(i).end());
      }
    }
    const detection::RcnnLoss pg = detection::rcnn_loss(codec, pg_props);
    rec.pg = pg.value;
    {
      std::vector<double> dcls(n);
      Tensor dreg(pg_pred.shape());
      for (std::size_t i = 0; i < n; ++i) {
        dcls[i] = pg.grad_prob[i] * pg_probs[i] * (1 - pg_probs[i]);
        if (!pg.grad_box[i].empty()) std::copy(pg.grad_box[i].begin(), pg.grad_box[i].end(), dreg.row(i).begin());
      }
      num::linear_backward(pg_cls.p, feats, column(dcls), pg_cls.g);
      num::linear_backward(pg_reg.p, feats, dreg, pg_reg.g);
    }

    // Refinement heads on the frozen pooled features.
    const std::vector<double> rc_probs = sigmoid_all(num::linear_forward(rc_cls.p, pooled));
    const Tensor rc_pred = num::linear_forward(rc_reg.p, pooled);
    std::vector<detection::RcnnProposal> rc_props = proposals;
    for (std::size_t k = 0; k < rc_props.size(); ++k) {
      rc_props[k].prob = rc_probs[k];
      if (rc_props[k].targets) rc_props[k].box_prediction.assign(rc_pred.row(k).begin(), rc_pred.row(k).end());
    }
    const detection::RcnnLoss rc = detection::rcnn_loss(codec, rc_props);
    rec.rcnn = rc.value;
    {
      std::vector<double> dcls(rc_props.size());
      Tensor dreg(rc_pred.shape());
      for (std::size_t k = 0; k < rc_props.size(); ++k) {
        dcls[k] = rc.grad_prob[k] * rc_probs[k] * (1 - rc_probs[k]);
        if (!rc.grad_box[k].empty()) std::copy(rc.grad_box[k].begin(), rc.grad_box[k].end(), dreg.row(k).begin());
      }
      num::linear_backward(rc_cls.p, pooled, column(dcls), rc_cls.g);
      num::linear_backward(rc_reg.p, pooled, dreg, rc_reg.g);
    }

    // Point-level contrastive loss.
    const Tensor pp = num::linear_forward(proj_p.p, feats);
    const Tensor pi = num::linear_forward(proj_i.p, point_image_feats);
    Tensor dpp(pp.shape()), dpi(pi.shape());
    if (!point_pairs.problem.anchors.empty()) {
      const omda::InfoNceResult cl = omda::info_nce(pp, pi, point_pairs.problem, {cfg.tau, false});
      rec.cl_point = cl.value;
      for (std::size_t k = 0; k < dpp.size(); ++k) dpp[k] = cfg.lambda * cl.grad_anchor[k];
      for (std::size_t k = 0; k < dpi.size(); ++k) dpi[k] = cfg.lambda * cl.grad_target[k];
    }

    // Object-level contrastive loss.
    const omda::ObjectPairs obj_pairs = omda::build_object_pairs(raw_classes, pasted_classes, raw_classes, bank);
    const omda::ContrastiveProblem obj_problem = obj_pairs.pruned();
    std::vector<Pooled> anchor_pool;
    for (const auto* group : {&raw_objects, &pasted_objects}) {
      for (const ObjectRows& o : *group) anchor_pool.push_back(pool(gather_rows(pp, o.point_rows)));
    }
    std::vector<Tensor> img_proj;
    std::vector<Pooled> image_pool;
    for (const ObjectRows& o : raw_objects) {
      img_proj.push_back(num::linear_forward(proj_i.p, o.image_rows));
      image_pool.push_back(pool(img_proj.back()));
    }
    if (!obj_problem.anchors.empty()) {
      Tensor anchors({anchor_pool.size(), opt.projection_dim});
      for (std::size_t k = 0; k < anchor_pool.size(); ++k) std::copy(anchor_pool[k].value.begin(), anchor_pool[k].value.end(), anchors.row(k).begin());
      Tensor image_objects({image_pool.size(), opt.projection_dim});
      for (std::size_t k = 0; k < image_pool.size(); ++k) std::copy(image_pool[k].value.begin(), image_pool[k].value.end(), image_objects.row(k).begin());
      const omda::InfoNceResult cl = omda::info_nce(anchors, obj_pairs.targets(image_objects, bank), obj_problem, {cfg.tau, false});
      rec.cl_object = cl.value;
      for (std::size_t k = 0; k < anchor_pool.size(); ++k) {
        const ObjectRows& o = k < raw_objects.size() ? raw_objects[k] : pasted_objects[k - raw_objects.size()];
        for (std::size_t c = 0; c < opt.projection_dim; ++c) {
          dpp(o.point_rows[anchor_pool[k].argmax[c]], c) += cfg.lambda * cl.grad_anchor(k, c);
        }
      }
      for (std::size_t k = 0; k < image_pool.size(); ++k) {
        Tensor g(img_proj[k].shape());
        for (std::size_t c = 0; c < opt.projection_dim; ++c) g(image_pool[k].argmax[c], c) = cfg.lambda * cl.grad_target(k, c);
        num::linear_backward(proj_i.p, raw_objects[k].image_rows, g, proj_i.g);
      }
    }
    num::linear_backward(proj_p.p, feats, dpp, proj_p.g);
    num::linear_backward(proj_i.p, point_image_feats, dpi, proj_i.g);

    rec.total = detection::total_loss({rec.seg + rec.pg, rec.rcnn, rec.cl_point, rec.cl_object}, cfg.lambda);
    report.records.push_back(rec);
    if (on_step) on_step(rec);
    if (step == opt.steps) break;

    const auto step_all = [](num::Adam& adam, const std::vector<Linear*>& layers) {
      std::vector<Tensor*> params;
      std::vector<const Tensor*> grads;
      for (Linear* l : layers) {
        params.insert(params.end(), {&l->p.weight, &l->p.bias});
        grads.insert(grads.end(), {&l->g.weight, &l->g.bias});
      }
      adam.step(params, grads);
    };
    step_all(head_adam, heads);
    step_all(projector_adam, projectors);

    std::vector<Tensor*> keys{&key_p.weight, &key_p.bias, &key_i.weight, &key_i.bias};
    omda::momentum_update(keys, {&proj_p.p.weight, &proj_p.p.bias, &proj_i.p.weight, &proj_i.p.bias}, cfg.momentum);
    const Tensor kp = num::linear_forward(key_p, feats);
    for (const ObjectRows& o : raw_objects) {
      bank.enqueue(o.class_id, omda::Modality::kPoint, omda::max_pool_rows(gather_rows(kp, o.point_rows)));
      bank.enqueue(o.class_id, omda::Modality::kImage, omda::max_pool_rows(num::linear_forward(key_i, o.image_rows)));
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace catdet::pipeline
