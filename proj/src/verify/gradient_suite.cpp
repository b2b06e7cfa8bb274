#include "catdet/verify/gradient_suite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <random>

#include "catdet/detection/losses.hpp"
#include "catdet/errors.hpp"
#include "catdet/kitti/scene.hpp"
#include "catdet/numerics/gradcheck.hpp"
#include "catdet/numerics/ops.hpp"
#include "catdet/omda/contrastive.hpp"

namespace catdet::verify {

namespace {

using num::Rng;

struct Case {
  Tensor x;
  std::function<double(const Tensor&)> f;
  Tensor analytic;
};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t({rows, cols});
  for (double& v : t.storage()) v = uniform(rng, -scale, scale);
  return t;
}

// Rows scaled to unit length, the regime the contrastive losses see.
Tensor random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t = random_tensor(rng, rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto n = num::l2_normalized(t.row(i));
    std::copy(n.begin(), n.end(), t.row(i).begin());
  }
  return t;
}

Tensor stack(const Tensor& a, const Tensor& b) {
  Tensor out({a.size() + b.size()});
  std::copy(a.storage().begin(), a.storage().end(), out.storage().begin());
  std::copy(b.storage().begin(), b.storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

std::pair<Tensor, Tensor> split(const Tensor& x, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb) {
  Tensor a(sa), b(sb);
  std::copy(x.storage().begin(), x.storage().begin() + static_cast<std::ptrdiff_t>(a.size()), a.storage().begin());
  std::copy(x.storage().begin() + static_cast<std::ptrdiff_t>(a.size()), x.storage().end(), b.storage().begin());
  return {a, b};
}

// Point features are anchors, image features sampled at each point are targets.
Case point_contrast_case(Rng& rng) {
  const auto calib = kitti::synthetic_calibration(320, 96);
  const std::size_t n_raw = 24, n_pasted = 6, dim = 32;
  std::uniform_int_distribution<int> cls(-1, kNumClasses - 1);
  PointCloud raw, pasted;
  raw.coords = Tensor({n_raw, 3});
  raw.class_id = std::vector<int>(n_raw);
  std::vector<double> scores(n_raw);
  for (std::size_t i = 0; i < n_raw; ++i) {
    raw.coords(i, 0) = uniform(rng, 6, 20);
    raw.coords(i, 1) = uniform(rng, -3, 3);
    raw.coords(i, 2) = uniform(rng, -1, 1);
    (*raw.class_id)[i] = cls(rng);
    scores[i] = (*raw.class_id)[i] == kBackground ? uniform(rng, 0, 0.25) : uniform(rng, 0.5, 1);
  }
  pasted.coords = Tensor({n_pasted, 3});
  pasted.class_id = std::vector<int>(n_pasted);
  for (std::size_t i = 0; i < n_pasted; ++i) {
    pasted.coords(i, 0) = uniform(rng, 6, 20);
    pasted.coords(i, 1) = uniform(rng, -3, 3);
    pasted.coords(i, 2) = uniform(rng, -1, 1);
    (*pasted.class_id)[i] = std::uniform_int_distribution<int>(0, kNumClasses - 1)(rng);
  }
  const auto pairs = omda::build_point_pairs(raw, pasted, calib, 320, 96, scores, 0.3);
  if (pairs.problem.anchors.empty()) throw OracleError("gradcheck clp: configuration has no anchors", 0);

  const std::size_t rows = n_raw + n_pasted;
  const Tensor anchors = random_unit_rows(rng, rows, dim), targets = random_unit_rows(rng, rows, dim);
  const auto problem = pairs.problem;
  const std::vector<std::size_t> shape{rows, dim};
  Case c;
  c.x = stack(anchors, targets);
  c.f = [problem, shape](const Tensor& x) {
    const auto [a, t] = split(x, shape, shape);
    return omda::info_nce(a, t, problem).value;
  };
  const auto res = omda::info_nce(anchors, targets, problem);
  c.analytic = stack(res.grad_anchor, res.grad_target);
  return c;
}

// Object anchors against image objects and both bank queues.
Case object_contrast_case(Rng& rng) {
  const std::size_t dim = 32;
  std::uniform_int_distribution<int> cls(0, kNumClasses - 1);
  std::vector<int> raw(2), pasted(2);
  for (int& c : raw) c = cls(rng);
  for (int& c : pasted) c = cls(rng);
  // Every class gets a raw object so pasted anchors always find a positive.
  raw.push_back(kCar);
  raw.push_back(kPedestrian);
  raw.push_back(kCyclist);
  const std::vector<int> image = raw;

  omda::MemoryBank bank(dim, 16);
  for (int c = 0; c < kNumClasses; ++c) {
    for (auto m : {omda::Modality::kPoint, omda::Modality::kImage}) {
      const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
      for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> f(dim);
        for (double& v : f) v = uniform(rng, -1, 1);
        bank.enqueue(c, m, f);
      }
    }
  }
  const auto pairs = omda::build_object_pairs(raw, pasted, image, bank);
  const auto problem = pairs.pruned();
  const Tensor anchors = random_unit_rows(rng, raw.size() + pasted.size(), dim);
  const Tensor image_feats = random_unit_rows(rng, image.size(), dim);
  const Tensor targets = pairs.targets(image_feats, bank);
  const std::vector<std::size_t> sa{anchors.dim(0), dim}, st{targets.dim(0), dim};
  Case c;
  c.x = stack(anchors, targets);
  c.f = [problem, sa, st](const Tensor& x) {
    const auto [a, t] = split(x, sa, st);
    return omda::info_nce(a, t, problem).value;
  };
  const auto res = omda::info_nce(anchors, targets, problem);
  c.analytic = stack(res.grad_anchor, res.grad_target);
  return c;
}

// Probabilities stay away from the clamp.
Case focal_case(Rng& rng) {
  const std::size_t n = 32;
  std::vector<bool> fg(n);
  Tensor x({n});
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = uniform(rng, 0.02, 0.98);
    fg[i] = std::bernoulli_distribution(0.4)(rng);
  }
  Case c;
  c.x = x;
  c.f = [fg](const Tensor& p) { return detection::seg_loss(p.storage(), fg).value; };
  c.analytic = Tensor::vector(detection::seg_loss(x.storage(), fg).grad);
  return c;
}

Box3D random_box(Rng& rng, const detection::BinCodec& codec, const std::array<double, 3>& anchor, int cls) {
  const auto& a = codec.anchor(cls);
  Box3D b;
  b.x = anchor[0] + uniform(rng, -0.95, 0.95) * codec.x.extent;
  b.y = anchor[1] + uniform(rng, -0.95, 0.95) * codec.y.extent;
  b.z = anchor[2] + uniform(rng, -0.5, 0.5);
  b.h = a.h * uniform(rng, 0.8, 1.2);
  b.w = a.w * uniform(rng, 0.8, 1.2);
  b.l = a.l * uniform(rng, 0.8, 1.2);
  b.theta = uniform(rng, -3.1, 3.1);
  b.class_id = cls;
  return b;
}

// Residual predictions are drawn so no smooth-L1 argument sits near |d| = 1.
std::vector<double> random_prediction(Rng& rng, const detection::BinCodec& codec, const detection::BoxTargets& t) {
  std::vector<double> pred(codec.layout_size());
  for (double& v : pred) v = uniform(rng, -2, 2);
  const auto res = t.residuals();
  const std::size_t r0 = codec.residual_offset();
  for (std::size_t k = 0; k < res.size(); ++k) {
    double d;
    do {
      d = uniform(rng, -2, 2);
    } while (std::abs(std::abs(d) - 1.0) < 1e-2);
    pred[r0 + k] = res[k] + d;
  }
  return pred;
}

Case box_case(Rng& rng) {
  const detection::BinCodec codec;
  const int cls = std::uniform_int_distribution<int>(0, kNumClasses - 1)(rng);
  const std::array<double, 3> anchor{uniform(rng, 5, 30), uniform(rng, -5, 5), uniform(rng, -1, 0)};
  const auto targets = detection::encode_box(codec, random_box(rng, codec, anchor, cls), anchor);
  const auto pred = random_prediction(rng, codec, targets);
  Case c;
  c.x = Tensor::vector(pred);
  c.f = [codec, targets](const Tensor& p) { return detection::box_loss(codec, p.storage(), targets).value; };
  c.analytic = Tensor::vector(detection::box_loss(codec, pred, targets).grad);
  return c;
}

// Inputs: every proposal probability, then the box predictions of the positives.
Case rcnn_case(Rng& rng) {
  const detection::BinCodec codec;
  const std::size_t n = 8;
  std::vector<detection::RcnnProposal> props(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = props[i];
    p.prob = uniform(rng, 0.05, 0.95);
    p.label = (i == 0 || std::bernoulli_distribution(0.5)(rng)) ? 1 : 0;
    if (p.label == 1) {
      const int cls = std::uniform_int_distribution<int>(0, kNumClasses - 1)(rng);
      const std::array<double, 3> anchor{uniform(rng, 5, 30), uniform(rng, -5, 5), uniform(rng, -1, 0)};
      p.targets = detection::encode_box(codec, random_box(rng, codec, anchor, cls), anchor);
      p.box_prediction = random_prediction(rng, codec, *p.targets);
    }
  }
  const auto pack = [&](const std::vector<detection::RcnnProposal>& ps) {
    std::vector<double> x;
    for (const auto& p : ps) x.push_back(p.prob);
    for (const auto& p : ps) x.insert(x.end(), p.box_prediction.begin(), p.box_prediction.end());
    return x;
  };
  const auto unpack = [props](const Tensor& x) {
    auto ps = props;
    std::size_t k = 0;
    for (auto& p : ps) p.prob = x[k++];
    for (auto& p : ps) {
      for (double& v : p.box_prediction) v = x[k++];
    }
    return ps;
  };
  Case c;
  c.x = Tensor::vector(pack(props));
  c.f = [codec, unpack](const Tensor& x) {
    const auto ps = unpack(x);
    return detection::rcnn_loss(codec, ps).value;
  };
  const auto res = detection::rcnn_loss(codec, props);
  std::vector<double> g = res.grad_prob;
  for (const auto& gb : res.grad_box) g.insert(g.end(), gb.begin(), gb.end());
  c.analytic = Tensor::vector(g);
  return c;
}

Case make_case(LossKind kind, Rng& rng) {
  switch (kind) {
    case LossKind::kPointContrast: return point_contrast_case(rng);
    case LossKind::kObjectContrast: return object_contrast_case(rng);
    case LossKind::kFocal: return focal_case(rng);
    case LossKind::kBox: return box_case(rng);
    case LossKind::kRcnn: return rcnn_case(rng);
  }
  throw ArgumentError("gradcheck: unknown loss");
}

}  // namespace

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kPointContrast: return "clp";
    case LossKind::kObjectContrast: return "clo";
    case LossKind::kFocal: return "focal";
    case LossKind::kBox: return "box";
    case LossKind::kRcnn: return "rcnn";
  }
  return "?";
}

std::optional<LossKind> loss_from_name(std::string_view name) {
  for (LossKind k : kAllLosses) {
    if (loss_name(k) == name) return k;
  }
  return std::nullopt;
}

GradcheckReport run_gradcheck(LossKind kind, const GradcheckOptions& opt) {
  if (opt.trials == 0) throw ArgumentError("gradcheck: trials must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.loss = kind;
  for (std::size_t t = 0; t < opt.trials; ++t) {
    const std::uint64_t seed = opt.seed * 1000003ULL + t;
    Rng rng(seed);
    const Case c = make_case(kind, rng);
    const Tensor numeric = num::finite_diff_grad(c.f, c.x, opt.step);
    const double err = num::max_relative_error(c.analytic, numeric, opt.floor);
    report.trials.push_back({seed, c.x.size(), err});
    report.worst = std::max(report.worst, err);
  }
  report.passed = report.worst < opt.tolerance;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace catdet::verify
