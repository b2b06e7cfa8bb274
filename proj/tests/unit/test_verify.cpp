#include <gtest/gtest.h>

#include <algorithm>

#include "catdet/pointops/sampling.hpp"
#include "catdet/verify/gradient_suite.hpp"
#include "catdet/verify/invariants.hpp"
#include "catdet/verify/oracles.hpp"

namespace catdet::verify {
void PrintTo(LossKind k, std::ostream* os) { *os << loss_name(k); }
}  // namespace catdet::verify

using namespace catdet;
using namespace catdet::verify;

namespace {

void expect_passed(const CheckResult& r) { EXPECT_TRUE(r.passed) << r.name << ": " << r.detail; }

}  // namespace

class GradientSuite : public ::testing::TestWithParam<LossKind> {};

TEST_P(GradientSuite, AnalyticMatchesCentralDifferences) {
  GradcheckOptions opt;
  opt.trials = 20;
  const GradcheckReport r = run_gradcheck(GetParam(), opt);
  EXPECT_TRUE(r.passed) << loss_name(GetParam()) << " worst " << r.worst;
  ASSERT_EQ(r.trials.size(), 20u);
  for (const auto& t : r.trials) {
    EXPECT_GT(t.parameters, 0u);
    EXPECT_LT(t.max_relative_error, opt.tolerance);
  }
}

INSTANTIATE_TEST_SUITE_P(AllLosses, GradientSuite, ::testing::ValuesIn(kAllLosses),
                         [](const auto& info) { return std::string(loss_name(info.param)); });

TEST(GradientSuite, LossNames) {
  for (LossKind k : kAllLosses) EXPECT_EQ(loss_from_name(loss_name(k)), k);
  EXPECT_EQ(loss_from_name("clp"), LossKind::kPointContrast);
  EXPECT_FALSE(loss_from_name("dice").has_value());
}

TEST(GradientSuite, ATinyToleranceFails) {
  GradcheckOptions opt;
  opt.trials = 2;
  opt.tolerance = 1e-14;
  EXPECT_FALSE(run_gradcheck(LossKind::kFocal, opt).passed);
}

TEST(Oracles, FpsReferenceHandExample) {
  // Square corners plus the centre: the farthest from corner 0 is the opposite corner.
  const Tensor c = Tensor::matrix({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.5, 0.5, 0}});
  EXPECT_EQ(fps_reference(c, 2), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(fps_reference(c, 3), (std::vector<std::size_t>{0, 3, 1}));
}

TEST(Oracles, BallReferenceHandExample) {
  const Tensor c = Tensor::matrix({{0, 0, 0}, {0.5, 0, 0}, {2, 0, 0}});
  EXPECT_EQ(ball_reference(c, 0, 1.0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(ball_reference(c, 2, 1.0), (std::vector<std::size_t>{2}));
}

TEST(Oracles, MonteCarloMatchesKnownAreas) {
  num::Rng rng(1);
  const Box3D a{0, 0, 0, 1, 2, 2, 0, kCar, 1};
  const Box3D b{1, 0, 0, 1, 2, 2, 0, kCar, 1};
  // Two 2x2 squares overlapping in a 1x2 strip.
  EXPECT_NEAR(monte_carlo_bev_intersection(a, b, 400, rng), 2.0, 1e-2);
  EXPECT_NEAR(monte_carlo_bev_iou(a, b, 400, rng), 2.0 / 6.0, 1e-2);
  const Box3D far{10, 0, 0, 1, 2, 2, 0, kCar, 1};
  EXPECT_EQ(monte_carlo_bev_intersection(a, far, 100, rng), 0.0);
}

TEST(Oracles, Suite) {
  expect_passed(check_fps());
  expect_passed(check_ball_query());
  expect_passed(check_rotated_iou());
  expect_passed(check_projection());
  expect_passed(check_ap_cases());
  expect_passed(check_codec_identity());
  expect_passed(check_trivial_detectors());
}

TEST(Oracles, ApCasesAreWellFormed) {
  const auto cases = constructed_ap_cases();
  ASSERT_GE(cases.size(), 3u);
  for (const auto& c : cases) {
    EXPECT_GE(c.ap11, 0.0);
    EXPECT_LE(c.ap11, 100.0);
    EXPECT_GE(c.ap40, 0.0);
    EXPECT_LE(c.ap40, 100.0);
  }
}

TEST(Invariants, AllHold) {
  for (const auto& r : run_invariants(0)) expect_passed(r);
}

TEST(Invariants, OtherSeeds) {
  for (std::uint64_t seed : {3u, 17u}) {
    expect_passed(check_gt_paste(seed));
    expect_passed(check_pair_exclusivity(seed));
    expect_passed(check_synthetic_frame(seed));
    expect_passed(check_iou_properties(100, seed));
  }
}
