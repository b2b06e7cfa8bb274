#include "catdet/pointformer/pointformer.hpp"

#include <numeric>
#include <string>

#include "catdet/errors.hpp"
#include "catdet/pointops/interpolate.hpp"
#include "catdet/pointops/sampling.hpp"

namespace catdet::pointformer {

PointformerConfig PointformerConfig::paper() { return PointformerConfig{}; }

PointformerConfig PointformerConfig::scaled() {
  PointformerConfig cfg;
  cfg.root_points = 256;
  cfg.counts = {64, 16, 8, 4};
  cfg.radii = {1.0, 2.0, 4.0, 8.0};
  cfg.channels = {16, 32, 48, 64};
  cfg.neighbors = {8, 8, 8, 4};
  cfg.projection_dim = 32;
  cfg.fp_channels = {48, 32, 32, 32};
  return cfg;
}

void PointformerConfig::validate() const {
  if (input_channels == 0) throw ArgumentError("pointformer: input_channels must be positive");
  if (counts[0] > root_points) throw ArgumentError("pointformer: first level samples more points than the input has");
  for (std::size_t i = 0; i < kLevels; ++i) {
    if (counts[i] == 0 || channels[i] == 0 || neighbors[i] == 0 || fp_channels[i] == 0) {
      throw ArgumentError("pointformer: counts, channels, neighbors and fp widths must be positive");
    }
    if (!(radii[i] > 0.0)) throw ArgumentError("pointformer: radii must be positive");
    if (i > 0 && counts[i] >= counts[i - 1]) throw ArgumentError("pointformer: sampled counts must strictly decrease");
    if (i > 0 && radii[i] <= radii[i - 1]) throw ArgumentError("pointformer: radii must strictly increase");
  }
  if (projection_dim == 0) throw ArgumentError("pointformer: projection_dim must be positive");
}

PtbLevelConfig PointformerConfig::level(std::size_t index) const {
  return PtbLevelConfig{counts.at(index), radii.at(index), channels.at(index), neighbors.at(index), projection_dim};
}

std::size_t PointformerConfig::level_input_width(std::size_t index) const {
  return index == 0 ? input_channels : channels.at(index - 1);
}

PtbParams init_ptb(std::size_t in_dim, const PtbLevelConfig& level, num::Rng& rng) {
  PtbParams p;
  p.local = init_bt(in_dim, level.channels, level.projection_dim, rng);
  p.global = init_bt(in_dim, level.channels, level.projection_dim, rng);
  p.compress = num::init_linear(2 * level.channels, level.channels, rng);
  return p;
}

PointformerParams init_pointformer(const PointformerConfig& cfg, num::Rng& rng) {
  cfg.validate();
  PointformerParams p;
  for (std::size_t i = 0; i < kLevels; ++i) p.blocks[i] = init_ptb(cfg.level_input_width(i), cfg.level(i), rng);
  // FP i maps (coarser width + skip width) of the finer level to fp_channels[i].
  std::size_t coarse = cfg.channels[kLevels - 1];
  for (std::size_t i = 0; i < kLevels; ++i) {
    const std::size_t finer = kLevels - 2 - i;  // wraps for the root
    const std::size_t skip = i + 1 < kLevels ? cfg.channels[finer] : cfg.input_channels;
    p.fp[i] = num::init_mlp(coarse + skip, cfg.fp_channels[i], cfg.fp_channels[i], rng);
    coarse = cfg.fp_channels[i];
  }
  return p;
}

PointCloud ptb_forward(const PtbLevelConfig& level, const PtbParams& params, const PointCloud& pc) {
  pc.validate();
  if (!pc.features) throw ArgumentError("ptb_forward: input cloud has no features");
  if (pc.feature_width() != params.local.in_dim()) {
    throw ShapeError("ptb_forward: feature width " + std::to_string(pc.feature_width()) + " does not match level input " +
                     std::to_string(params.local.in_dim()));
  }
  const auto centroids = pointops::farthest_point_sample(pc, level.points);
  const auto groups = pointops::ball_query(pc, centroids, level.radius, level.neighbors);
  const std::size_t m = centroids.size(), d = level.channels;

  Tensor combined({m, 2 * d});
  {
    const BtEvaluator local(params.local, pc.coords, *pc.features);
    for (std::size_t i = 0; i < m; ++i) {
      local.evaluate(groups[i].centroid_index, groups[i].member_indices, combined.row(i).subspan(0, d));
    }
  }
  PointCloud out = catdet::select_points(pc, centroids);
  {
    const BtEvaluator global(params.global, out.coords, *out.features);
    std::vector<std::size_t> everyone(m);
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) global.evaluate(i, everyone, combined.row(i).subspan(d, d));
  }
  combined.check_finite("ptb_forward");
  out.features = num::linear_forward(params.compress, combined);
  return out;
}

PointformerOutput pointformer_forward(const PointformerConfig& cfg, const PointformerParams& params,
                                      const PointCloud& pc, const LevelHook& hook) {
  cfg.validate();
  pc.validate();
  if (pc.size() != cfg.root_points) {
    throw ArgumentError("pointformer_forward: expected " + std::to_string(cfg.root_points) + " points, got " +
                        std::to_string(pc.size()));
  }
  if (pc.feature_width() != cfg.input_channels) {
    throw ShapeError("pointformer_forward: input features must have width " + std::to_string(cfg.input_channels));
  }
  PointformerOutput out;
  const PointCloud* current = &pc;
  for (std::size_t i = 0; i < kLevels; ++i) {
    out.levels[i] = ptb_forward(cfg.level(i), params.blocks[i], *current);
    if (hook) {
      Tensor replaced = hook(i, out.levels[i]);
      if (!replaced.empty()) {
        if (replaced.shape() != out.levels[i].features->shape()) {
          throw ShapeError("pointformer level hook changed the feature shape");
        }
        out.levels[i].features = std::move(replaced);
      }
    }
    current = &out.levels[i];
  }

  const Tensor* coarse_coords = &out.levels[kLevels - 1].coords;
  const Tensor* coarse_feats = &*out.levels[kLevels - 1].features;
  for (std::size_t i = 0; i < kLevels; ++i) {
    const bool to_root = i + 1 == kLevels;
    const PointCloud& fine = to_root ? pc : out.levels[kLevels - 2 - i];
    const Tensor interpolated = pointops::feature_propagation(*coarse_coords, *coarse_feats, fine.coords);
    const Tensor joined = concat_columns({&interpolated, &*fine.features});
    out.upsampled[i] = num::mlp_forward(params.fp[i], joined);
    coarse_coords = &fine.coords;
    coarse_feats = &out.upsampled[i];
  }
  return out;
}

}  // namespace catdet::pointformer
