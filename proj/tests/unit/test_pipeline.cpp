#include <gtest/gtest.h>

#include <cmath>

#include "catdet/errors.hpp"
#include "catdet/pipeline/forward.hpp"
#include "catdet/pipeline/overfit.hpp"

using namespace catdet;
using namespace catdet::pipeline;

TEST(Forward, SyntheticFrameFollowsConfig) {
  const kitti::RunConfig cfg = kitti::RunConfig::preset("scaled");
  const kitti::Frame f = synthetic_frame(cfg);
  EXPECT_EQ(f.image_width(), cfg.model.image.width);
  EXPECT_EQ(f.image_height(), cfg.model.image.height);
  EXPECT_EQ(kitti::target_boxes(f.labels).size(), 2u);

  const ForwardRun run = run_forward(cfg, f);
  EXPECT_EQ(run.input.size(), cfg.model.point.root_points);
  EXPECT_GE(run.forward_seconds, 0.0);
  for (double v : run.output.features.storage()) ASSERT_TRUE(std::isfinite(v));
}

TEST(Forward, SeedChangesTheResample) {
  kitti::RunConfig a = kitti::RunConfig::preset("scaled");
  kitti::RunConfig b = a;
  b.seed = 5;
  const kitti::Frame f = synthetic_frame(a);
  EXPECT_NE(run_forward(a, f).input.coords.storage(), run_forward(b, f).input.coords.storage());
}

TEST(Overfit, ShortRunIsDeterministic) {
  OverfitOptions opt;
  opt.steps = 20;
  std::size_t calls = 0;
  const OverfitReport a = run_overfit(opt, [&](const StepRecord&) { ++calls; });
  const OverfitReport b = run_overfit(opt);
  ASSERT_EQ(a.records.size(), 21u);
  EXPECT_EQ(calls, a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].step, i);
    EXPECT_EQ(a.records[i].total, b.records[i].total);
    EXPECT_EQ(a.records[i].accuracy, b.records[i].accuracy);
  }
  EXPECT_GT(a.pasted_objects, 0u);
  EXPECT_GT(a.point_anchors, 0u);
  EXPECT_GT(a.proposals, 0u);
}

TEST(Overfit, TotalIsTheWeightedSum) {
  OverfitOptions opt;
  opt.steps = 3;
  const OverfitReport r = run_overfit(opt);
  const double lambda = opt.config.lambda;
  for (const StepRecord& s : r.records) {
    EXPECT_NEAR(s.total, s.seg + s.pg + s.rcnn + lambda * (s.cl_point + s.cl_object), 1e-9 * (1 + std::abs(s.total)));
  }
}

TEST(Overfit, FullRunFitsTheFrame) {
  OverfitOptions opt;
  const OverfitReport r = run_overfit(opt);
  ASSERT_EQ(r.records.size(), opt.steps + 1);
  EXPECT_DOUBLE_EQ(r.final().accuracy, 1.0);
  EXPECT_LE(r.final().total, 0.5 * r.initial().total);
  EXPECT_LT(r.final().seg, r.initial().seg);
  EXPECT_LT(r.final().pg, r.initial().pg);
}

TEST(Overfit, BadOptionsThrow) {
  OverfitOptions opt;
  opt.lr = 0;
  EXPECT_THROW(run_overfit(opt), ArgumentError);
  opt = {};
  opt.projection_dim = 0;
  EXPECT_THROW(run_overfit(opt), ArgumentError);
}
