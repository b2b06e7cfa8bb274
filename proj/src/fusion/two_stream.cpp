#include "catdet/fusion/two_stream.hpp"

#include "catdet/errors.hpp"

namespace catdet::fusion {

LevelFusion fuse_level(const CmtParams& params, const PointCloud& points, const Tensor& image_map,
                       const Calibration& calib, std::size_t image_width, std::size_t image_height,
                       const CmtConfig& cfg) {
  if (!points.features) throw ArgumentError("fuse_level: point features are required");
  if (image_map.rank() != 3) throw ShapeError("fuse_level: image map must be [C, H, W]");
  if (image_width == 0 || image_height == 0) throw ArgumentError("fuse_level: image extent must be positive");
  const double sx = static_cast<double>(image_map.dim(2)) / static_cast<double>(image_width);
  const double sy = static_cast<double>(image_map.dim(1)) / static_cast<double>(image_height);

  const std::vector<Projection> proj = project_points(calib, points.coords);
  std::vector<std::array<double, 2>> pixels(proj.size());
  LevelFusion out;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    if (!in_image(proj[i], image_width, image_height)) ++out.out_of_image;
    pixels[i] = {(proj[i].u + 0.5) * sx - 0.5, (proj[i].v + 0.5) * sy - 0.5};
  }
  const ImageSample sample = sample_image_features(image_map, pixels);
  out.features = cmt_forward(params, *points.features, sample.features, cfg).output;
  return out;
}

TwoStreamConfig TwoStreamConfig::paper() {
  TwoStreamConfig c;
  c.point = pointformer::PointformerConfig::paper();
  c.image = imageformer::ImageformerConfig::paper();
  return c;
}

TwoStreamConfig TwoStreamConfig::scaled() {
  TwoStreamConfig c;
  c.point = pointformer::PointformerConfig::scaled();
  c.image = imageformer::ImageformerConfig::scaled();
  return c;
}

void TwoStreamConfig::validate() const {
  point.validate();
  image.validate();
  if (cmt.block_rows == 0) throw ArgumentError("two-stream: CMT block rows must be positive");
}

TwoStreamParams init_two_stream(const TwoStreamConfig& cfg, num::Rng& rng) {
  cfg.validate();
  TwoStreamParams p;
  p.point = pointformer::init_pointformer(cfg.point, rng);
  p.image = imageformer::init_imageformer(cfg.image, rng);
  for (std::size_t l = 0; l < pointformer::kLevels; ++l) {
    const std::size_t d = cfg.point.channels[l];
    p.cmt[l] = init_cmt(d, cfg.image.channels[l], d, rng);
  }
  const std::size_t d = cfg.point.output_width();
  p.cmt[4] = init_cmt(d, cfg.image.out_channels, d, rng);
  return p;
}

TwoStreamOutput two_stream_forward(const TwoStreamConfig& cfg, const TwoStreamParams& params, const PointCloud& pc,
                                   const Tensor& image, const Calibration& calib) {
  cfg.validate();
  calib.validate();
  if (image.rank() != 3 || image.dim(1) != cfg.image.height || image.dim(2) != cfg.image.width) {
    throw ShapeError("two-stream: image is " + image.shape_string() + ", config expects [" +
                     std::to_string(cfg.image.input_channels) + ", " + std::to_string(cfg.image.height) + ", " +
                     std::to_string(cfg.image.width) + "]");
  }

  TwoStreamOutput out;
  ShapeTrace& tr = out.trace;
  out.image = imageformer::imageformer_forward(cfg.image, params.image, image);

  const pointformer::LevelHook hook = [&](std::size_t level, const PointCloud& cloud) -> Tensor {
    if (!cfg.cmt_layers[level]) return {};
    LevelFusion f = fuse_level(params.cmt[level], cloud, out.image.levels[level], calib, cfg.image.width,
                               cfg.image.height, cfg.cmt);
    tr.out_of_image[level] = f.out_of_image;
    return std::move(f.features);
  };
  out.point = pointformer::pointformer_forward(cfg.point, params.point, pc, hook);

  out.features = out.point.features();
  if (cfg.cmt_layers[4]) {
    PointCloud root;
    root.coords = pc.coords;
    root.features = out.features;
    LevelFusion f = fuse_level(params.cmt[4], root, out.image.fused, calib, cfg.image.width, cfg.image.height, cfg.cmt);
    tr.out_of_image[4] = f.out_of_image;
    out.features = std::move(f.features);
  }

  tr.point_counts.push_back(pc.size());
  for (const PointCloud& level : out.point.levels) tr.point_counts.push_back(level.size());
  for (const Tensor& up : out.point.upsampled) tr.point_counts.push_back(up.dim(0));
  for (std::size_t l = 0; l < pointformer::kLevels; ++l) {
    tr.pt_channels[l] = out.point.levels[l].feature_width();
    const Tensor& map = out.image.levels[l];
    tr.it_channels[l] = map.dim(0);
    tr.it_maps[l] = {map.dim(2), map.dim(1)};
    tr.tokens[l] = cfg.image.tokens(l);
  }
  tr.cmt_active = cfg.cmt_layers;
  tr.output_width = out.features.dim(1);
  tr.fused_map = {out.image.fused.dim(0), out.image.fused.dim(1), out.image.fused.dim(2)};
  return out;
}

}  // namespace catdet::fusion
