#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "catdet/errors.hpp"
#include "catdet/evalkit/iou.hpp"
#include "catdet/numerics/gradcheck.hpp"
#include "catdet/numerics/ops.hpp"
#include "catdet/omda/contrastive.hpp"
#include "catdet/omda/gt_paste.hpp"
#include "catdet/omda/memory_bank.hpp"
#include "catdet/omda/object_db.hpp"

using namespace catdet;
using namespace catdet::omda;

namespace {

Tensor random_tensor(num::Rng& rng, std::vector<std::size_t> shape, double extent = 1.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = u(rng);
  return t;
}

ContrastiveProblem single_anchor(std::vector<std::size_t> positives, std::vector<std::size_t> negatives) {
  ContrastiveProblem p;
  p.negative_groups.push_back(std::move(negatives));
  p.anchors.push_back({0, std::move(positives), 0, {}});
  return p;
}

// Camera looking along +z with the LiDAR frame equal to the camera frame; 100x100 image.
fusion::Calibration pinhole() {
  fusion::Calibration c = fusion::Calibration::identity();
  c.c_rect = Tensor::matrix({{10, 0, 50, 0}, {0, 10, 50, 0}, {0, 0, 1, 0}});
  return c;
}

PointCloud labelled(std::vector<std::array<double, 3>> pts, std::vector<int> classes) {
  PointCloud pc;
  pc.coords = Tensor({pts.size(), 3});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) pc.coords(i, k) = pts[i][k];
  }
  pc.class_id = std::move(classes);
  return pc;
}

Box3D car_at(double x, double y, double theta = 0.0) { return Box3D{x, y, -1.0, 1.5, 1.6, 3.9, theta, kCar, 1.0}; }

// Ground grid plus a handful of points inside each box.
Scene scene_with(const std::vector<Box3D>& boxes, num::Rng& rng) {
  std::vector<std::array<double, 3>> pts;
  std::vector<int> cls;
  std::uniform_real_distribution<double> ux(0, 40), uy(-15, 15), unit(-0.45, 0.45);
  for (int i = 0; i < 200; ++i) {
    const std::array<double, 3> p{ux(rng), uy(rng), -1.9};
    bool inside = false;
    for (const Box3D& b : boxes) inside = inside || b.contains(p);
    if (inside) continue;
    pts.push_back(p);
    cls.push_back(kBackground);
  }
  for (const Box3D& b : boxes) {
    for (int i = 0; i < 12; ++i) {
      pts.push_back(b.to_world({unit(rng) * b.l, unit(rng) * b.w, unit(rng) * b.h}));
      cls.push_back(b.class_id);
    }
  }
  Scene s{labelled(pts, cls), boxes};
  s.cloud.fg_score = std::vector<double>(pts.size(), 0.0);
  return s;
}

ObjectSample sample_at(const Box3D& box, num::Rng& rng, const std::string& source = "donor") {
  Scene donor = scene_with({box}, rng);
  return crop_object(donor.cloud, box, source);
}

}  // namespace

TEST(InfoNce, EqualSimilaritiesGiveZero) {
  const Tensor anchors = Tensor::matrix({{1, 0}});
  const Tensor targets = Tensor::matrix({{0.6, 0.8}, {0.6, -0.8}});
  EXPECT_NEAR(info_nce(anchors, targets, single_anchor({0}, {1})).value, 0.0, 1e-12);
}

TEST(InfoNce, HandValues) {
  // s+ = 1, s- = 0 at tau 0.07.
  const Tensor a = Tensor::matrix({{1, 0}});
  const Tensor t = Tensor::matrix({{2, 0}, {0, 3}});
  EXPECT_NEAR(info_nce(a, t, single_anchor({0}, {1})).value, -1.0 / 0.07, 1e-10);

  // s+ = 0, two negatives at 0, tau 1: ln 2.
  const Tensor a3 = Tensor::matrix({{1, 0, 0}});
  const Tensor t3 = Tensor::matrix({{0, 1, 0}, {0, 0, 1}, {0, -1, 0}});
  EXPECT_NEAR(info_nce(a3, t3, single_anchor({0}, {1, 2}), {1.0}).value, std::log(2.0), 1e-12);

  // With the positive in its own denominator: -log(e / (e + 1)).
  InfoNceOptions with_pos{1.0, true};
  EXPECT_NEAR(info_nce(a, t, single_anchor({0}, {1}), with_pos).value, -std::log(std::exp(1.0) / (std::exp(1.0) + 1)),
              1e-12);
}

TEST(InfoNce, ExcludedRowsLeaveTheDenominator) {
  const Tensor a = Tensor::matrix({{1, 0}});
  const Tensor t = Tensor::matrix({{1, 0}, {0, 1}, {1, 0}});
  ContrastiveProblem p = single_anchor({0}, {1, 2});
  EXPECT_EQ(p.negatives(p.anchors[0]), (std::vector<std::size_t>{1, 2}));
  p.anchors[0].excluded = {2};
  EXPECT_EQ(p.negatives(p.anchors[0]), (std::vector<std::size_t>{1}));
  EXPECT_NEAR(info_nce(a, t, p, {1.0}).value, -1.0, 1e-12);
  EXPECT_EQ(p.positive_count(), 1u);
  EXPECT_EQ(p.negative_count(), 1u);
}

TEST(InfoNce, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    num::Rng rng(seed);
    Tensor a = random_tensor(rng, {4, 6}), t = random_tensor(rng, {7, 6});
    ContrastiveProblem p;
    p.negative_groups = {{2, 3, 4}, {5, 6}};
    p.anchors = {{0, {0}, 0, {}}, {1, {1, 0}, 1, {}}, {3, {2}, 1, {6}}};
    const InfoNceOptions opt{0.5, seed % 2 == 1};
    const auto res = info_nce(a, t, p, opt);
    const auto fa = num::finite_diff_grad([&](const Tensor& x) { return info_nce(x, t, p, opt).value; }, a, 1e-6);
    const auto ft = num::finite_diff_grad([&](const Tensor& x) { return info_nce(a, x, p, opt).value; }, t, 1e-6);
    EXPECT_LT(num::max_relative_error(res.grad_anchor, fa, 1e-8), 1e-4) << "seed " << seed;
    EXPECT_LT(num::max_relative_error(res.grad_target, ft, 1e-8), 1e-4) << "seed " << seed;
  }
}

TEST(InfoNce, MonotoneInPositiveAndNegativeSimilarity) {
  // Anchor e0; positive and negative move along unit circles toward or away from it.
  const auto at_angle = [](double ang) { return std::array<double, 2>{std::cos(ang), std::sin(ang)}; };
  num::Rng rng(3);
  std::uniform_real_distribution<double> angle(0.1, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double pos = angle(rng), neg = angle(rng);
    const auto loss = [&](double p_ang, double n_ang) {
      const auto p = at_angle(p_ang), n = at_angle(n_ang);
      const Tensor t = Tensor::matrix({{p[0], p[1]}, {n[0], n[1]}, {-1, 0}});
      return info_nce(Tensor::matrix({{1, 0}}), t, single_anchor({0}, {1, 2})).value;
    };
    EXPECT_LT(loss(pos - 0.05, neg), loss(pos, neg));  // closer positive
    EXPECT_GT(loss(pos, neg - 0.05), loss(pos, neg));  // closer negative
  }
}

TEST(InfoNce, Errors) {
  const Tensor a = Tensor::matrix({{1, 0}});
  const Tensor t = Tensor::matrix({{1, 0}, {0, 1}});
  EXPECT_THROW(info_nce(a, t, single_anchor({0}, {})), ArgumentError);
  EXPECT_THROW(info_nce(a, t, single_anchor({0}, {1}), {0.0}), ArgumentError);
  EXPECT_THROW(info_nce(Tensor::matrix({{0, 0}}), t, single_anchor({0}, {1})), NumericError);
  EXPECT_THROW(info_nce(a, Tensor::matrix({{1, 0, 0}}), single_anchor({0}, {0})), ShapeError);
  EXPECT_NO_THROW(info_nce(a, t, single_anchor({0}, {}), {1.0, true}));
}

TEST(PointPairs, OneForegroundTwoBackground) {
  const PointCloud raw = labelled({{0, 0, 5}, {1, 0, 5}, {-1, 0, 5}}, {kCar, kBackground, kBackground});
  const std::vector<double> scores{0.9, 0.1, 0.2};
  const PointPairs pp = build_point_pairs(raw, PointCloud{}, pinhole(), 100, 100, scores, 0.3);
  ASSERT_EQ(pp.problem.anchors.size(), 1u);
  EXPECT_EQ(pp.problem.positive_count(), 1u);
  EXPECT_EQ(pp.problem.negative_count(), 2u);
  EXPECT_EQ(pp.problem.anchors[0].positives, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(pp.exclusive());
}

TEST(PointPairs, PastedPointPairsWithBestRawPoint) {
  const PointCloud raw = labelled({{0, 0, 5}, {0.5, 0, 5}, {1, 1, 5}}, {kCar, kCar, kBackground});
  PointCloud pasted = labelled({{2, 1, 5}}, {kCar});
  const std::vector<double> scores{0.9, 0.95, 0.1};
  const PointPairs pp = build_point_pairs(raw, pasted, pinhole(), 100, 100, scores, 0.3);
  EXPECT_EQ(pp.diagnostics.raw_anchors, 2u);
  EXPECT_EQ(pp.diagnostics.pasted_anchors, 1u);
  const ContrastiveAnchor& last = pp.problem.anchors.back();
  EXPECT_EQ(last.row, 3u);
  EXPECT_EQ(last.positives, (std::vector<std::size_t>{1}));
  EXPECT_EQ(pp.problem.negatives(last), (std::vector<std::size_t>{3}));
}

TEST(PointPairs, PastedClassWithoutRawPointsIsSkipped) {
  const PointCloud raw = labelled({{0, 0, 5}, {1, 1, 5}}, {kCar, kBackground});
  const PointCloud pasted = labelled({{2, 1, 5}}, {kPedestrian});
  const std::vector<double> scores{0.9, 0.1};
  const PointPairs pp = build_point_pairs(raw, pasted, pinhole(), 100, 100, scores, 0.3);
  EXPECT_EQ(pp.diagnostics.pasted_anchors, 0u);
  EXPECT_EQ(pp.diagnostics.skipped_no_same_class, 1u);
}

TEST(PointPairs, NoLowScoresMeansNoRawAnchors) {
  const PointCloud raw = labelled({{0, 0, 5}, {1, 0, 5}}, {kCar, kBackground});
  const std::vector<double> scores{0.9, 0.6};
  const PointPairs pp = build_point_pairs(raw, PointCloud{}, pinhole(), 100, 100, scores, 0.3);
  EXPECT_TRUE(pp.problem.anchors.empty());
  EXPECT_EQ(pp.diagnostics.skipped_no_negatives, 1u);
}

TEST(PointPairs, OutOfImageProjectionsAreDropped) {
  // (100, 0, 5) lands at u = 250; (0, 0, -5) is behind the camera.
  const PointCloud raw =
      labelled({{0, 0, 5}, {100, 0, 5}, {1, 0, 5}, {0, 0, -5}}, {kCar, kCar, kBackground, kBackground});
  const std::vector<double> scores{0.9, 0.9, 0.1, 0.1};
  const PointPairs pp = build_point_pairs(raw, PointCloud{}, pinhole(), 100, 100, scores, 0.3);
  EXPECT_EQ(pp.problem.anchors.size(), 1u);
  EXPECT_EQ(pp.problem.negative_count(), 1u);
  EXPECT_EQ(pp.diagnostics.dropped_out_of_image, 2u);
}

TEST(PointPairs, SharedPixelIsNeverBothPositiveAndNegative) {
  // (2, 0, 10) projects onto the same pixel as the anchor (1, 0, 5).
  const PointCloud raw = labelled({{1, 0, 5}, {2, 0, 10}, {-1, 0, 5}}, {kCar, kBackground, kBackground});
  const std::vector<double> scores{0.9, 0.1, 0.1};
  const PointPairs pp = build_point_pairs(raw, PointCloud{}, pinhole(), 100, 100, scores, 0.3);
  ASSERT_EQ(pp.problem.anchors.size(), 1u);
  EXPECT_EQ(pp.problem.negatives(pp.problem.anchors[0]), (std::vector<std::size_t>{2}));
  EXPECT_EQ(pp.diagnostics.excluded_overlaps, 1u);
  EXPECT_TRUE(pp.exclusive());
}

TEST(PointPairs, ExclusiveOnRandomScenes) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    num::Rng rng(seed);
    std::uniform_real_distribution<double> xy(-3, 3), z(2, 20), u(0, 1), scale(1.5, 3);
    std::uniform_int_distribution<int> cls(-1, 2);
    std::vector<std::array<double, 3>> pts;
    std::vector<int> classes;
    std::vector<double> scores;
    for (int i = 0; i < 40; ++i) {
      pts.push_back({xy(rng), xy(rng), z(rng)});
      classes.push_back(cls(rng));
      scores.push_back(classes.back() == kBackground ? 0.3 * u(rng) : u(rng));
    }
    // Scaled copies share a pixel with their original.
    for (int i = 0; i < 10; ++i) {
      const auto p = pts[static_cast<std::size_t>(i)];
      const double s = scale(rng);
      pts.push_back({p[0] * s, p[1] * s, p[2] * s});
      classes.push_back(kBackground);
      scores.push_back(0.05);
    }
    const PointCloud raw = labelled(pts, classes);
    const PointCloud pasted = labelled({{xy(rng), xy(rng), z(rng)}, {xy(rng), xy(rng), z(rng)}}, {kCar, kCyclist});
    const PointPairs pp = build_point_pairs(raw, pasted, pinhole(), 100, 100, scores, 0.3);
    EXPECT_TRUE(pp.exclusive()) << "seed " << seed;
    for (const auto& a : pp.problem.anchors) EXPECT_FALSE(pp.problem.negatives(a).empty());
  }
}

TEST(PointPairs, Errors) {
  const PointCloud raw = labelled({{0, 0, 5}}, {kCar});
  EXPECT_THROW(build_point_pairs(raw, PointCloud{}, pinhole(), 100, 100, std::vector<double>{}, 0.3), ShapeError);
  PointCloud unlabelled = raw;
  unlabelled.class_id.reset();
  EXPECT_THROW(build_point_pairs(unlabelled, PointCloud{}, pinhole(), 100, 100, std::vector<double>{0.5}, 0.3),
               ArgumentError);
}

TEST(ObjectPairs, SingleRawObjectEmptyBank) {
  const MemoryBank bank(4);
  const std::vector<int> raw{kCar}, pasted{}, image{kCar};
  const ObjectPairs op = build_object_pairs(raw, pasted, image, bank);
  EXPECT_EQ(op.problem.positive_count(), 1u);
  EXPECT_EQ(op.problem.negative_count(), 0u);
  EXPECT_EQ(op.anchors_without_negatives, 1u);
  EXPECT_TRUE(op.pruned().anchors.empty());
}

TEST(ObjectPairs, PastedCarPairsWithRawCarImage) {
  const MemoryBank bank(4);
  const std::vector<int> raw{kCar, kPedestrian}, pasted{kCar}, image{kCar, kPedestrian};
  const ObjectPairs op = build_object_pairs(raw, pasted, image, bank);
  ASSERT_EQ(op.problem.anchors.size(), 3u);
  EXPECT_EQ(op.problem.anchors[2].row, 2u);
  EXPECT_EQ(op.problem.anchors[2].positives, (std::vector<std::size_t>{0}));
  // The other-class image object is a negative.
  EXPECT_EQ(op.problem.negatives(op.problem.anchors[2]), (std::vector<std::size_t>{1}));
}

TEST(ObjectPairs, BankEntriesOfOtherClassesAreNegatives) {
  MemoryBank bank(2);
  bank.enqueue(kPedestrian, Modality::kPoint, std::vector<double>{1, 0});
  bank.enqueue(kPedestrian, Modality::kImage, std::vector<double>{0, 1});
  bank.enqueue(kCar, Modality::kPoint, std::vector<double>{1, 1});
  const std::vector<int> raw{kCar}, pasted{}, image{kCar};
  const ObjectPairs op = build_object_pairs(raw, pasted, image, bank);
  EXPECT_EQ(op.problem.negative_count(), 2u);
  const Tensor targets = op.targets(Tensor::matrix({{0.5, 0.5}}), bank);
  ASSERT_EQ(targets.dim(0), 4u);
  for (std::size_t k : op.problem.negatives(op.problem.anchors[0])) {
    EXPECT_EQ(op.bank_refs[k - 1].class_id, kPedestrian);
  }
}

TEST(ObjectPairs, Errors) {
  const MemoryBank bank(2);
  const std::vector<int> raw{kCar}, none{}, two{kCar, kCar}, bad{7};
  EXPECT_THROW(build_object_pairs(raw, none, two, bank), ShapeError);
  EXPECT_THROW(build_object_pairs(bad, none, raw, bank), ArgumentError);
}

TEST(ObjectFeature, MaxPoolAndNormalise) {
  std::vector<std::size_t> arg;
  EXPECT_EQ(max_pool_rows(Tensor::matrix({{1, 2}, {3, 0}}), &arg), (std::vector<double>{3, 2}));
  EXPECT_EQ(arg, (std::vector<std::size_t>{1, 0}));
  const auto g = object_feature(Tensor::matrix({{1, 2}, {3, 0}}));
  EXPECT_NEAR(g[0], 3 / std::sqrt(13.0), 1e-15);
  EXPECT_NEAR(g[1], 2 / std::sqrt(13.0), 1e-15);
  const auto single = object_feature(Tensor::matrix({{3, 4}}));
  EXPECT_NEAR(single[0], 0.6, 1e-15);
  EXPECT_NEAR(single[1], 0.8, 1e-15);
  EXPECT_EQ(max_pool_rows(Tensor::matrix({{2, -1}, {2, -1}, {2, -1}})), (std::vector<double>{2, -1}));
  EXPECT_THROW(max_pool_rows(Tensor()), ArgumentError);
}

TEST(ObjectFeature, RowsInBox) {
  const Tensor coords = Tensor::matrix({{10, 0, -1}, {30, 0, -1}, {10.5, 0.3, -0.8}});
  const Tensor feats = Tensor::matrix({{1}, {2}, {3}});
  EXPECT_EQ(rows_in_box(feats, coords, car_at(10, 0)), Tensor::matrix({{1}, {3}}));
}

TEST(MemoryBank, FifoCapacityAndNormalisation) {
  MemoryBank bank(3);
  EXPECT_EQ(bank.capacity(), 1024u);
  bank.enqueue(kCar, Modality::kPoint, std::vector<double>{3, 0, 4});
  EXPECT_EQ(bank.size(kCar, Modality::kPoint), 1u);
  EXPECT_EQ(bank.size(kCar, Modality::kImage), 0u);
  for (int i = 1; i <= 1024; ++i) {
    bank.enqueue(kCar, Modality::kPoint, std::vector<double>{static_cast<double>(i), 1, 0});
  }
  EXPECT_EQ(bank.size(kCar, Modality::kPoint), 1024u);
  const auto& q = bank.queue(kCar, Modality::kPoint);
  // The (3, 0, 4) entry is gone; the oldest left is push #1.
  EXPECT_NEAR(q.front()[0], 1 / std::sqrt(2.0), 1e-15);
  for (const auto& v : q) EXPECT_NEAR(v[0] * v[0] + v[1] * v[1] + v[2] * v[2], 1.0, 1e-12);
  EXPECT_EQ(bank.total(), 1024u);
}

TEST(MemoryBank, Errors) {
  MemoryBank bank(2);
  EXPECT_THROW(bank.enqueue(kCar, Modality::kImage, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(bank.enqueue(5, Modality::kImage, std::vector<double>{1, 2}), ArgumentError);
  EXPECT_THROW(bank.enqueue(kCar, Modality::kImage, std::vector<double>{0, 0}), NumericError);
  EXPECT_THROW(MemoryBank(0), ArgumentError);
}

TEST(Momentum, ArithmeticAndGeometricSeries) {
  std::vector<Tensor> k{Tensor({2, 2})};
  const std::vector<Tensor> q{Tensor::filled({2, 2}, 1.0)};
  momentum_update(k, q);
  EXPECT_NEAR(k[0][0], 0.001, 1e-15);
  for (int i = 1; i < 50; ++i) momentum_update(k, q);
  EXPECT_NEAR(k[0][3], 1 - std::pow(0.999, 50), 1e-14);
  std::vector<Tensor> copy{Tensor({2, 2})};
  momentum_update(copy, q, 0.0);
  EXPECT_EQ(copy[0], q[0]);
}

TEST(Momentum, ContractsDistanceByM) {
  num::Rng rng(4);
  std::vector<Tensor> k{random_tensor(rng, {3, 4}), random_tensor(rng, {5})};
  const std::vector<Tensor> q{random_tensor(rng, {3, 4}), random_tensor(rng, {5})};
  const auto dist = [&] {
    double s = 0;
    for (std::size_t t = 0; t < k.size(); ++t) {
      for (std::size_t i = 0; i < k[t].size(); ++i) s += (k[t][i] - q[t][i]) * (k[t][i] - q[t][i]);
    }
    return std::sqrt(s);
  };
  const double before = dist();
  momentum_update(k, q, 0.9);
  EXPECT_NEAR(dist(), 0.9 * before, 1e-12);
}

TEST(Momentum, Errors) {
  std::vector<Tensor> k{Tensor({2})};
  EXPECT_THROW(momentum_update(k, std::vector<Tensor>{Tensor({3})}), ShapeError);
  EXPECT_THROW(momentum_update(k, std::vector<Tensor>{}), ShapeError);
  EXPECT_THROW(momentum_update(k, std::vector<Tensor>{Tensor({2})}, 1.5), ArgumentError);
}

TEST(ObjectDb, CropIsInBoxFrame) {
  num::Rng rng(5);
  const Box3D box = car_at(12, 3, 0.7);
  const Scene s = scene_with({box}, rng);
  const ObjectSample obj = crop_object(s.cloud, box, "frame-7");
  EXPECT_EQ(obj.points.size(), 12u);
  EXPECT_NO_THROW(obj.validate());
  for (std::size_t i = 0; i < obj.points.size(); ++i) {
    const auto w = box.to_world(obj.points.point(i));
    bool found = false;
    for (std::size_t j = 0; j < s.cloud.size(); ++j) {
      const auto p = s.cloud.point(j);
      found = found || (std::abs(p[0] - w[0]) < 1e-12 && std::abs(p[1] - w[1]) < 1e-12 && std::abs(p[2] - w[2]) < 1e-12);
    }
    EXPECT_TRUE(found);
  }
  EXPECT_THROW(crop_object(s.cloud, car_at(100, 100), "x"), ArgumentError);
}

TEST(ObjectDb, SaveLoadRoundTrip) {
  num::Rng rng(6);
  std::vector<ObjectSample> db{sample_at(car_at(10, 2, 0.3), rng, "a"),
                               sample_at(Box3D{8, -4, -1.2, 1.7, 0.6, 0.8, -1.0, kPedestrian, 1.0}, rng, "b")};
  const auto dir = std::filesystem::temp_directory_path() / "catdet_test_object_db";
  std::filesystem::remove_all(dir);
  save_object_db(dir, db);
  const auto loaded = load_object_db(dir);
  std::filesystem::remove_all(dir);
  ASSERT_EQ(loaded.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(loaded[k].source, db[k].source);
    EXPECT_EQ(loaded[k].class_id(), db[k].class_id());
    EXPECT_DOUBLE_EQ(loaded[k].box.theta, db[k].box.theta);
    ASSERT_EQ(loaded[k].points.size(), db[k].points.size());
    for (std::size_t i = 0; i < db[k].points.coords.size(); ++i) {
      EXPECT_NEAR(loaded[k].points.coords[i], db[k].points.coords[i], 1e-6);
    }
  }
}

TEST(GtPaste, EmptyDatabaseLeavesSceneUnchanged) {
  num::Rng rng(7);
  const Scene s = scene_with({car_at(10, 0)}, rng);
  const PasteResult r = gt_paste(s, {}, {10, 0});
  EXPECT_EQ(r.scene.cloud.coords, s.cloud.coords);
  EXPECT_TRUE(r.record.pasted.empty());
  EXPECT_TRUE(r.record.rejected.empty());
}

TEST(GtPaste, SingleObjectIntoEmptySceneIsVerbatim) {
  num::Rng rng(8);
  const Box3D box = car_at(20, -5, 1.1);
  const std::vector<ObjectSample> db{sample_at(box, rng)};
  const Scene s = scene_with({}, rng);
  const PasteResult r = gt_paste(s, db, {10, 0});
  ASSERT_EQ(r.record.pasted.size(), 1u);
  EXPECT_EQ(r.scene.boxes.size(), 1u);
  const std::size_t first = r.record.first_point;
  EXPECT_EQ(r.scene.cloud.size(), first + db[0].points.size());
  for (std::size_t i = 0; i < db[0].points.size(); ++i) {
    const auto want = box.to_world(db[0].points.point(i));
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.scene.cloud.coords(first + i, k), want[k], 1e-12);
    EXPECT_EQ((*r.scene.cloud.class_id)[first + i], kCar);
    EXPECT_EQ((*r.scene.cloud.fg_score)[first + i], 1.0);
  }
}

TEST(GtPaste, OverlappingCandidateIsRejected) {
  num::Rng rng(9);
  const std::vector<ObjectSample> db{sample_at(car_at(10.5, 0.2), rng), sample_at(car_at(25, 8), rng)};
  const Scene s = scene_with({car_at(10, 0)}, rng);
  const PasteResult r = gt_paste(s, db, {10, 0});
  EXPECT_EQ(r.record.rejected, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.record.db_indices, (std::vector<std::size_t>{1}));
}

TEST(GtPaste, ScenePointsInsidePastedBoxesAreRemoved) {
  num::Rng rng(10);
  const Box3D box = car_at(15, 0);
  const std::vector<ObjectSample> db{sample_at(box, rng)};
  Scene s = scene_with({}, rng);
  PointCloud extra = labelled({{15, 0, -1}, {15.5, 0.2, -0.5}}, {kBackground, kBackground});
  extra.fg_score = std::vector<double>(2, 0.0);
  s.cloud = append_points(s.cloud, extra);
  const PasteResult r = gt_paste(s, db, {10, 0});
  EXPECT_GE(r.record.removed_points, 2u);
  for (std::size_t i = 0; i < r.record.first_point; ++i) EXPECT_FALSE(box.contains(r.scene.cloud.point(i)));
}

TEST(GtPaste, NoOverlapsAfterPasteExhaustive) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    num::Rng rng(seed);
    std::uniform_real_distribution<double> ux(5, 35), uy(-12, 12), ut(-3.1, 3.1);
    std::vector<ObjectSample> db;
    for (int i = 0; i < 25; ++i) {
      const int cls = i % kNumClasses;
      const Box3D b = cls == kCar ? car_at(ux(rng), uy(rng), ut(rng))
                                  : Box3D{ux(rng), uy(rng), -1.0, 1.7, 0.7, cls == kPedestrian ? 0.8 : 1.8, ut(rng),
                                          cls, 1.0};
      db.push_back(sample_at(b, rng));
    }
    const Scene s = scene_with({car_at(15, 0), car_at(25, -6, 0.5)}, rng);
    const std::size_t max_paste = 3 + seed % 8;
    const PasteResult r = gt_paste(s, db, {max_paste, seed});
    EXPECT_LE(r.record.pasted.size(), max_paste);
    EXPECT_EQ(r.record.pasted.size() + r.record.rejected.size() <= db.size(), true);
    const auto& boxes = r.scene.boxes;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        EXPECT_EQ(eval::bev_iou(boxes[i], boxes[j]), 0.0) << "seed " << seed << " pair " << i << "," << j;
      }
    }
    const PasteResult again = gt_paste(s, db, {max_paste, seed});
    EXPECT_EQ(again.record.db_indices, r.record.db_indices);
    EXPECT_EQ(again.scene.cloud.coords, r.scene.cloud.coords);
  }
}

TEST(GtPaste, ClassStratifiedOrder) {
  num::Rng rng(11);
  std::vector<ObjectSample> db;
  for (int i = 0; i < 4; ++i) db.push_back(sample_at(car_at(6 + 6 * i, 10), rng));
  db.push_back(sample_at(Box3D{8, -8, -1, 1.7, 0.6, 0.8, 0, kPedestrian, 1.0}, rng));
  db.push_back(sample_at(Box3D{14, -8, -1, 1.7, 0.6, 1.8, 0, kCyclist, 1.0}, rng));
  const PasteResult r = gt_paste(scene_with({}, rng), db, {3, 1});
  ASSERT_EQ(r.record.pasted.size(), 3u);
  std::vector<int> classes;
  for (const Box3D& b : r.record.pasted) classes.push_back(b.class_id);
  EXPECT_EQ(classes, (std::vector<int>{kCar, kPedestrian, kCyclist}));
}
