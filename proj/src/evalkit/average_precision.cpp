#include "catdet/evalkit/average_precision.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "catdet/errors.hpp"
#include "catdet/evalkit/iou.hpp"

namespace catdet::eval {
namespace {

constexpr double kRecallTolerance = 1e-12;

struct RankedDet {
  double score;
  bool tp;
};

// Per-frame greedy matching. Returns the frame's detections of the class with a TP flag.
std::vector<RankedDet> match_frame(const std::vector<Box3D>& dets, const std::vector<Box3D>& gts, int class_id,
                                   double threshold, IouMetric metric) {
  std::vector<std::size_t> det_idx, gt_idx;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].class_id == class_id) det_idx.push_back(i);
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].class_id == class_id) gt_idx.push_back(i);
  }
  std::stable_sort(det_idx.begin(), det_idx.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> used(gt_idx.size(), false);
  std::vector<RankedDet> out;
  out.reserve(det_idx.size());
  for (std::size_t d : det_idx) {
    double best = -1.0;
    std::size_t best_g = gt_idx.size();
    for (std::size_t g = 0; g < gt_idx.size(); ++g) {
      if (used[g]) continue;
      const Box3D& gt = gts[gt_idx[g]];
      const double iou = metric == IouMetric::k3d ? iou_3d(dets[d], gt) : bev_iou(dets[d], gt);
      if (iou >= threshold && iou > best) {
        best = iou;
        best_g = g;
      }
    }
    if (best_g < gt_idx.size()) used[best_g] = true;
    out.push_back({dets[d].score, best_g < gt_idx.size()});
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

}  // namespace

void EvalConfig::validate() const {
  for (double t : iou_threshold) {
    if (!(t > 0.0 && t <= 1.0)) throw ArgumentError("IoU thresholds must be in (0, 1]");
  }
  if (recall_positions != 11 && recall_positions != 40) throw ArgumentError("recall positions must be 11 or 40");
  if (jobs == 0) throw ArgumentError("jobs must be at least 1");
}

std::vector<double> EvalConfig::recall_points() const {
  std::vector<double> r;
  if (recall_positions == 11) {
    for (int i = 0; i <= 10; ++i) r.push_back(i / 10.0);
  } else {
    for (int i = 1; i <= 40; ++i) r.push_back(i / 40.0);
  }
  return r;
}

double interpolated_ap(const std::vector<PrSample>& curve, const std::vector<double>& recall_points) {
  if (recall_points.empty()) throw ArgumentError("interpolated_ap: no recall points");
  double sum = 0;
  for (double r : recall_points) {
    double best = 0;
    for (const PrSample& s : curve) {
      if (s.recall >= r - kRecallTolerance) best = std::max(best, s.precision);
    }
    sum += best;
  }
  return 100.0 * sum / static_cast<double>(recall_points.size());
}

ApResult average_precision(const FrameBoxes& detections, const FrameBoxes& ground_truth, int class_id,
                           const EvalConfig& cfg) {
  cfg.validate();
  if (class_id < 0 || class_id >= kNumClasses) throw ArgumentError("average_precision: unknown class");
  if (detections.size() != ground_truth.size()) {
    throw ArgumentError("average_precision: detection and ground-truth frame counts differ");
  }
  for (const auto& frame : detections) {
    for (const Box3D& b : frame) {
      if (!(b.score >= 0.0 && b.score <= 1.0)) throw ArgumentError("average_precision: scores must be in [0, 1]");
    }
  }

  const double threshold = cfg.iou_threshold[static_cast<std::size_t>(class_id)];
  const std::size_t frames = detections.size();
  std::vector<std::vector<RankedDet>> per_frame(frames);
  const auto work = [&](std::size_t first) {
    for (std::size_t f = first; f < frames; f += cfg.jobs) {
      per_frame[f] = match_frame(detections[f], ground_truth[f], class_id, threshold, cfg.metric);
    }
  };
  if (cfg.jobs == 1 || frames < 2) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < cfg.jobs; ++j) pool.emplace_back(work, j);
  }

  ApResult res;
  res.class_id = class_id;
  for (const auto& frame : ground_truth) {
    res.gt_count += static_cast<std::size_t>(
        std::count_if(frame.begin(), frame.end(), [&](const Box3D& b) { return b.class_id == class_id; }));
  }
  std::vector<RankedDet> all;
  for (auto& f : per_frame) all.insert(all.end(), f.begin(), f.end());
  std::stable_sort(all.begin(), all.end(), [](const RankedDet& a, const RankedDet& b) { return a.score > b.score; });
  res.detections = all.size();
  if (res.gt_count == 0) return res;

  std::size_t tp = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].tp) ++tp;
    res.curve.push_back({static_cast<double>(tp) / static_cast<double>(res.gt_count),
                         static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  res.true_positives = tp;
  res.ap = interpolated_ap(res.curve, cfg.recall_points());
  return res;
}

std::string pr_curve_csv(const std::vector<PrSample>& samples) {
  if (samples.empty()) throw ArgumentError("PR curve has no samples");
  std::string out = "recall,precision\n";
  for (const PrSample& s : samples) out += fixed(s.recall, 6) + "," + fixed(s.precision, 6) + "\n";
  return out;
}

std::string pr_curve_svg(const std::vector<PrSample>& samples) {
  if (samples.empty()) throw ArgumentError("PR curve has no samples");
  constexpr double kW = 640, kH = 480, kMargin = 40;
  std::string points;
  for (const PrSample& s : samples) {
    const double x = kMargin + s.recall * (kW - 2 * kMargin);
    const double y = kH - kMargin - s.precision * (kH - 2 * kMargin);
    if (!points.empty()) points += ' ';
    points += fixed(x, 2) + "," + fixed(y, 2);
  }
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 480\">\n"
         "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"" +
         points + "\"/>\n</svg>\n";
}

void emit_pr_curve(const std::vector<PrSample>& samples, const std::filesystem::path& csv_path,
                   const std::filesystem::path& svg_path) {
  const std::string csv = pr_curve_csv(samples);
  const std::string svg = pr_curve_svg(samples);
  write_file(csv_path, csv);
  write_file(svg_path, svg);
}

}  // namespace catdet::eval
