#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "catdet/errors.hpp"
#include "catdet/evalkit/iou.hpp"
#include "catdet/kitti/config.hpp"
#include "catdet/kitti/formats.hpp"
#include "catdet/kitti/scene.hpp"
#include "catdet/numerics/ops.hpp"

using namespace catdet;
using namespace catdet::kitti;

namespace {

std::string record(float x, float y, float z, float r) {
  std::string out(16, '\0');
  const float v[4] = {x, y, z, r};
  std::memcpy(out.data(), v, 16);
  return out;
}

PointCloud cloud_of(const std::vector<std::array<double, 3>>& pts) {
  PointCloud pc;
  pc.coords = Tensor({pts.size(), 3});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) pc.coords(i, k) = pts[i][k];
  }
  return pc;
}

const char* kIdentityCalib =
    "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n"
    "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n"
    "R0_rect: 1 0 0 0 1 0 0 0 1\n"
    "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"
    "Tr_imu_to_velo: 1 0 0 0 0 1 0 0 0 0 1 0\n";

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("catdet_kitti_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

template <typename F>
ParseError parse_error_of(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "expected ParseError";
  return ParseError("none");
}

}  // namespace

TEST(Velodyne, SixteenBytesIsOnePoint) {
  const PointCloud pc = parse_velodyne(record(1.5f, -2.0f, 0.25f, 0.75f));
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_EQ(pc.point(0), (std::array<double, 3>{1.5, -2.0, 0.25}));
  ASSERT_TRUE(pc.features.has_value());
  EXPECT_EQ(pc.feature_width(), 1u);
  EXPECT_EQ((*pc.features)(0, 0), 0.75);
}

TEST(Velodyne, EmptyAndPartialInputThrow) {
  EXPECT_THROW(parse_velodyne(""), ParseError);
  EXPECT_THROW(parse_velodyne(record(1, 2, 3, 4).substr(0, 15)), ParseError);
  EXPECT_THROW(parse_velodyne(record(1, 2, 3, 4) + "abc"), ParseError);
}

TEST(Velodyne, RoundTripIsBitExact) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-50, 50);
  std::string bytes;
  for (int i = 0; i < 257; ++i) bytes += record(u(rng), u(rng), u(rng), std::abs(u(rng)) / 50);
  const PointCloud pc = parse_velodyne(bytes);
  EXPECT_EQ(pc.size(), 257u);
  EXPECT_EQ(write_velodyne(pc), bytes);

  TempDir dir;
  write_velodyne_file(dir.path / "a.bin", pc);
  EXPECT_EQ(write_velodyne(read_velodyne_file(dir.path / "a.bin")), bytes);
  EXPECT_THROW(read_velodyne_file(dir.path / "missing.bin"), Error);
}

TEST(Calib, IdentityText) {
  const auto c = parse_calib(kIdentityCalib);
  const Tensor p = c.projection_matrix();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(p(i, j), i == j ? 1.0 : 0.0);
  }
}

TEST(Calib, FormatRoundTrip) {
  fusion::Calibration c = synthetic_calibration(1280, 384);
  c.t_cam_from_lidar(0, 3) = 0.27;
  c.t_cam_from_lidar(2, 3) = -0.08;
  const auto back = parse_calib(format_calib(c));
  for (std::size_t k = 0; k < 12; ++k) {
    EXPECT_NEAR(back.c_rect.storage()[k], c.c_rect.storage()[k], 1e-9 * (1 + std::abs(c.c_rect.storage()[k])));
  }
  for (std::size_t k = 0; k < 16; ++k) {
    EXPECT_NEAR(back.r_rect.storage()[k], c.r_rect.storage()[k], 1e-12);
    EXPECT_NEAR(back.t_cam_from_lidar.storage()[k], c.t_cam_from_lidar.storage()[k], 1e-12);
  }
}

TEST(Calib, ErrorsCarryPosition) {
  EXPECT_THROW(parse_calib("P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0 1\n"), ParseError);

  const ParseError bad = parse_error_of([] {
    parse_calib("P2: 1 0 0 0 0 1 0 0 0 0 x 0\nR0_rect: 1 0 0 0 1 0 0 0 1\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  });
  EXPECT_EQ(bad.line(), 1u);
  EXPECT_EQ(bad.field(), 12u);

  const ParseError short_row = parse_error_of([] {
    parse_calib("P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 1 0 0 0 1 0 0 0\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  });
  EXPECT_EQ(short_row.line(), 2u);
  EXPECT_EQ(short_row.field(), 10u);

  const ParseError no_colon = parse_error_of([] { parse_calib("\n\nP2 1 0 0\n"); });
  EXPECT_EQ(no_colon.line(), 3u);
  EXPECT_EQ(no_colon.field(), 1u);

  // A non-orthonormal rectification is a geometry problem, not a syntax one.
  EXPECT_THROW(parse_calib("P2: 1 0 0 0 0 1 0 0 0 0 1 0\nR0_rect: 2 0 0 0 1 0 0 0 1\n"
                           "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"),
               GeometryError);
}

TEST(Labels, DontCareIsKeptButExcluded) {
  const auto calib = synthetic_calibration(1280, 384);
  const auto labels = parse_labels(
      "Car 0.00 0 -1.57 600 150 700 250 1.50 1.60 3.90 0.00 1.65 20.00 -1.57\n"
      "DontCare -1 -1 -10 10 10 40 40 -1 -1 -1 -1000 -1000 -1000 -10\n"
      "Van 0 0 0 1 1 2 2 2 2 5 1 1.5 30 0\n",
      calib);
  ASSERT_EQ(labels.size(), 3u);
  EXPECT_FALSE(labels[0].excluded);
  EXPECT_TRUE(labels[1].excluded);
  EXPECT_TRUE(labels[2].excluded);
  EXPECT_EQ(labels[1].type, "DontCare");
  const auto targets = target_boxes(labels);
  ASSERT_EQ(targets.size(), 1u);
  EXPECT_EQ(targets[0].class_id, kCar);
}

TEST(Labels, CameraToLidarConversion) {
  // Synthetic camera: camera (x, y, z) = (-y, -z - 0.08, x - 0.27) in LiDAR terms.
  const auto calib = synthetic_calibration(1280, 384);
  const auto labels =
      parse_labels("Car 0 0 0 0 0 10 10 1.50 1.60 3.90 2.00 1.65 20.00 0.00\n", calib);
  const Box3D b = labels[0].box;
  EXPECT_NEAR(b.x, 20.27, 1e-9);
  EXPECT_NEAR(b.y, -2.0, 1e-9);
  EXPECT_NEAR(b.z, -(1.65 - 0.75) - 0.08, 1e-9);
  // rotation_y = 0 faces camera +x, which is LiDAR -y.
  EXPECT_NEAR(b.theta, -M_PI / 2, 1e-9);
  EXPECT_DOUBLE_EQ(b.h, 1.5);
  EXPECT_DOUBLE_EQ(b.w, 1.6);
  EXPECT_DOUBLE_EQ(b.l, 3.9);
}

TEST(Labels, SixteenthFieldIsTheScore) {
  const auto calib = synthetic_calibration(1280, 384);
  const auto labels = parse_labels("Pedestrian 0 0 0 0 0 10 10 1.7 0.6 0.8 1 1.6 10 0 0.42\n", calib);
  EXPECT_DOUBLE_EQ(labels[0].score, 0.42);
  EXPECT_DOUBLE_EQ(labels[0].box.score, 0.42);
  EXPECT_EQ(labels[0].box.class_id, kPedestrian);
}

TEST(Labels, ErrorsCarryPosition) {
  const auto calib = synthetic_calibration(1280, 384);
  const ParseError few = parse_error_of([&] { parse_labels("\nCar 0 0 0 0 0 10 10 1 1 1 0 0\n", calib); });
  EXPECT_EQ(few.line(), 2u);
  EXPECT_EQ(few.field(), 14u);

  const ParseError bad = parse_error_of([&] { parse_labels("Car 0 0 0 0 0 10 10 1.5 1.6 abc 0 1 20 0\n", calib); });
  EXPECT_EQ(bad.line(), 1u);
  EXPECT_EQ(bad.field(), 11u);

  const ParseError occ = parse_error_of([&] { parse_labels("Car 0 1.5 0 0 0 10 10 1.5 1.6 3.9 0 1 20 0\n", calib); });
  EXPECT_EQ(occ.field(), 3u);

  EXPECT_THROW(parse_labels("Car 0 0 0 0 0 10 10 0 1.6 3.9 0 1 20 0\n", calib), ParseError);
}

TEST(Labels, BoxRoundTripThroughText) {
  const auto calib = synthetic_calibration(1280, 384);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(5, 60), uy(-20, 20), ut(-3.1, 3.1);
  std::vector<Label> labels;
  std::vector<Box3D> boxes;
  for (int i = 0; i < 50; ++i) {
    const Box3D b{ux(rng), uy(rng), -0.8, 1.5, 1.6, 3.9, ut(rng), i % kNumClasses, 0.5};
    boxes.push_back(b);
    labels.push_back(label_from_box(b, calib));
  }
  const auto back = parse_labels(format_labels(labels, true), calib);
  ASSERT_EQ(back.size(), boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& a = boxes[i];
    const Box3D& b = back[i].box;
    EXPECT_NEAR(a.x, b.x, 1e-6);
    EXPECT_NEAR(a.y, b.y, 1e-6);
    EXPECT_NEAR(a.z, b.z, 1e-6);
    EXPECT_NEAR(normalize_angle(a.theta - b.theta), 0.0, 1e-6);
    EXPECT_EQ(a.class_id, b.class_id);
    EXPECT_DOUBLE_EQ(b.score, 0.5);
  }
}

TEST(Range, CropKeepsInteriorPoints) {
  const PointCloud pc = cloud_of({{100, 0, 0}, {35, 0, 0}, {10, -41, 0}, {10, 5, -3.5}, {0.5, 0, 0.5}});
  const PointCloud out = crop_range(pc, 0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.point(0), (std::array<double, 3>{35, 0, 0}));
  EXPECT_EQ(out.point(1), (std::array<double, 3>{0.5, 0, 0.5}));
  EXPECT_THROW(crop_range(cloud_of({{100, 0, 0}}), 0), ArgumentError);
}

TEST(Range, CropSubsamplesToLimit) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(1, 70), uy(-39, 39), uz(-2.9, 0.9);
  std::vector<std::array<double, 3>> pts(20000);
  for (auto& p : pts) p = {ux(rng), uy(rng), uz(rng)};
  PointCloud pc = cloud_of(pts);
  std::vector<int> ids(pts.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i % 3);
  pc.class_id = ids;

  const PointCloud a = crop_range(pc, 7);
  const PointCloud b = crop_range(pc, 7);
  const PointCloud c = crop_range(pc, 8);
  ASSERT_EQ(a.size(), 16384u);
  EXPECT_EQ(a.coords.storage(), b.coords.storage());
  EXPECT_NE(a.coords.storage(), c.coords.storage());
  ASSERT_TRUE(a.class_id.has_value());
  EXPECT_EQ(a.class_id->size(), 16384u);
  // Original order is preserved: x is a random column, so check via the index mapping.
  std::size_t j = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (j < pts.size() && pts[j] != a.point(i)) ++j;
    ASSERT_LT(j, pts.size());
    EXPECT_EQ((*a.class_id)[i], ids[j]);
    ++j;
  }
}

TEST(Range, ResampleIndices) {
  const auto down = resample_indices(100, 30, 1);
  ASSERT_EQ(down.size(), 30u);
  EXPECT_TRUE(std::is_sorted(down.begin(), down.end()));
  EXPECT_EQ(std::adjacent_find(down.begin(), down.end()), down.end());
  EXPECT_EQ(resample_indices(100, 30, 1), down);

  const auto up = resample_indices(10, 25, 2);
  ASSERT_EQ(up.size(), 25u);
  EXPECT_TRUE(std::is_sorted(up.begin(), up.end()));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NE(std::find(up.begin(), up.end(), i), up.end());

  EXPECT_EQ(resample_indices(7, 7, 3), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(resample_indices(0, 5, 0), ArgumentError);
  EXPECT_EQ(resample_to(cloud_of({{1, 2, 3}}), 4, 0).size(), 4u);
}

TEST(Range, LabelPoints) {
  PointCloud pc = cloud_of({{10, 0, -1}, {10, 1.5, -1}, {20, 0, -1}, {30, 0, -1}});
  label_points(pc, {Box3D{10, 0, -1, 1.5, 1.6, 3.9, 0, kCar, 1}, Box3D{20, 0, -1, 1.7, 0.6, 0.8, 0, kPedestrian, 1}});
  EXPECT_EQ(*pc.class_id, (std::vector<int>{kCar, kBackground, kPedestrian, kBackground}));
}

TEST(Synthetic, ZeroCountsGiveBackgroundOnly) {
  SyntheticSceneSpec spec;
  spec.counts = {0, 0, 0};
  const Frame f = generate_synthetic(spec);
  EXPECT_TRUE(f.labels.empty());
  EXPECT_GT(f.cloud.size(), 0u);
  for (int c : *f.cloud.class_id) EXPECT_EQ(c, kBackground);
  EXPECT_EQ(f.image_width(), 1280u);
  EXPECT_EQ(f.image_height(), 384u);
}

TEST(Synthetic, OneCarWithItsPointsInside) {
  SyntheticSceneSpec spec;
  spec.seed = 4;
  spec.counts = {1, 0, 0};
  const Frame f = generate_synthetic(spec);
  ASSERT_EQ(f.labels.size(), 1u);
  const Box3D box = f.labels[0].box;
  EXPECT_EQ(box.class_id, kCar);
  std::size_t members = 0;
  for (std::size_t i = 0; i < f.cloud.size(); ++i) {
    const bool inside = box.contains(f.cloud.point(i));
    EXPECT_EQ(inside, (*f.cloud.class_id)[i] == kCar) << i;
    members += inside;
  }
  EXPECT_EQ(members, spec.points_per_object);
}

TEST(Synthetic, ScenesAreValidAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSceneSpec spec;
    spec.seed = seed;
    const Frame f = generate_synthetic(spec);
    f.cloud.validate();
    ASSERT_EQ(f.labels.size(), 4u);
    const auto boxes = target_boxes(f.labels);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      EXPECT_GE(boxes[i].x, spec.x_range[0]);
      EXPECT_LE(boxes[i].x, spec.x_range[1]);
      for (std::size_t j = i + 1; j < boxes.size(); ++j) EXPECT_EQ(eval::bev_iou(boxes[i], boxes[j]), 0.0);
    }
    // Object points project inside their box's image silhouette.
    std::size_t total = 0, inside = 0;
    for (std::size_t i = 0; i < f.cloud.size(); ++i) {
      const int c = (*f.cloud.class_id)[i];
      if (c == kBackground) continue;
      for (const Box3D& b : boxes) {
        if (!b.contains(f.cloud.point(i))) continue;
        const auto hull = projected_silhouette(b, f.calib);
        const auto p = fusion::project_lidar_to_image(f.calib, f.cloud.point(i));
        ++total;
        inside += point_in_convex(hull, p.u, p.v);
      }
    }
    EXPECT_EQ(total, 4 * spec.points_per_object);
    EXPECT_GE(static_cast<double>(inside), 0.99 * static_cast<double>(total));
    for (double v : f.image.storage()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticSceneSpec spec;
  spec.seed = 9;
  const Frame a = generate_synthetic(spec), b = generate_synthetic(spec);
  EXPECT_EQ(a.cloud.coords.storage(), b.cloud.coords.storage());
  EXPECT_EQ(a.image.storage(), b.image.storage());
}

TEST(Synthetic, PlacementFailureAndValidation) {
  SyntheticSceneSpec crowded;
  crowded.counts = {60, 0, 0};
  crowded.x_range = {8, 12};
  crowded.y_range = {-3, 3};
  EXPECT_THROW(generate_synthetic(crowded), GeometryError);

  SyntheticSceneSpec bad;
  bad.x_range = {10, 5};
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = {};
  bad.x_range = {8, 90};
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = {};
  bad.points_per_object = 0;
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(Synthetic, SilhouetteHelpers) {
  const auto calib = synthetic_calibration(1280, 384);
  const auto hull = projected_silhouette(Box3D{20, 0, -0.8, 1.5, 1.6, 3.9, 0, kCar, 1}, calib);
  ASSERT_GE(hull.size(), 4u);
  EXPECT_TRUE(point_in_convex(hull, 640, 192));
  EXPECT_FALSE(point_in_convex(hull, 10, 10));
  EXPECT_TRUE(projected_silhouette(Box3D{-10, 0, 0, 1.5, 1.6, 3.9, 0, kCar, 1}, calib).empty());
}

TEST(Frame, PngAndFrameRoundTrip) {
  SyntheticSceneSpec spec;
  spec.image_width = 64;
  spec.image_height = 32;
  spec.seed = 2;
  const Frame f = generate_synthetic(spec);
  TempDir dir;
  write_frame(dir.path / "000000", f);
  const Frame g = read_frame(dir.path / "000000");

  ASSERT_EQ(g.image.shape(), f.image.shape());
  // 8-bit quantisation.
  for (std::size_t k = 0; k < f.image.size(); ++k) {
    EXPECT_NEAR(g.image.storage()[k], f.image.storage()[k], 0.5 / 255 + 1e-12);
  }
  ASSERT_EQ(g.cloud.size(), f.cloud.size());
  for (std::size_t k = 0; k < f.cloud.coords.size(); ++k) {
    EXPECT_EQ(g.cloud.coords.storage()[k], static_cast<double>(static_cast<float>(f.cloud.coords.storage()[k])));
  }
  ASSERT_EQ(g.labels.size(), f.labels.size());
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    EXPECT_NEAR(g.labels[i].box.x, f.labels[i].box.x, 1e-6);
    EXPECT_EQ(g.labels[i].box.class_id, f.labels[i].box.class_id);
  }

  write_png(dir.path / "x.png", g.image);
  EXPECT_EQ(read_png(dir.path / "x.png").storage(), g.image.storage());
  write_text_file(dir.path / "junk.png", "not a png");
  EXPECT_THROW(read_png(dir.path / "junk.png"), ParseError);
  EXPECT_THROW(write_png(dir.path / "y.png", Tensor({2, 4, 4})), ShapeError);
}

TEST(Config, PresetsAndKeys) {
  const RunConfig paper = RunConfig::preset("paper");
  EXPECT_EQ(paper.model.point.root_points, 16384u);
  EXPECT_THROW(RunConfig::preset("huge"), ArgumentError);

  const RunConfig c = parse_config(
      "# comment\n"
      "seed = 42\n"
      "\n"
      "tau = 0.1\n"
      "cmt.layers = 1, 0, on, off, true\n"
      "scene.counts = 3,0,2\n"
      "max_paste = 4\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_DOUBLE_EQ(c.tau, 0.1);
  EXPECT_EQ(c.model.cmt_layers, (std::array<bool, 5>{true, false, true, false, true}));
  EXPECT_EQ(c.scene.counts, (std::array<std::size_t, 3>{3, 0, 2}));
  EXPECT_EQ(c.max_paste, 4u);
  EXPECT_EQ(c.scene.image_width, c.model.image.width);

  const RunConfig p = parse_config("preset = paper\nseed = 1\n");
  EXPECT_EQ(p.model.point.root_points, 16384u);
}

TEST(Config, ErrorsCarryPosition) {
  const ParseError unknown = parse_error_of([] { parse_config("seed = 1\nbogus = 2\n"); });
  EXPECT_EQ(unknown.line(), 2u);
  EXPECT_EQ(unknown.field(), 1u);

  const ParseError value = parse_error_of([] { parse_config("\n\ntau = abc\n"); });
  EXPECT_EQ(value.line(), 3u);
  EXPECT_EQ(value.field(), 2u);

  const ParseError missing = parse_error_of([] { parse_config("seed =\n"); });
  EXPECT_EQ(missing.field(), 2u);

  const ParseError no_eq = parse_error_of([] { parse_config("seed 1\n"); });
  EXPECT_EQ(no_eq.field(), 1u);

  const ParseError late_preset = parse_error_of([] { parse_config("seed = 1\npreset = paper\n"); });
  EXPECT_EQ(late_preset.line(), 2u);

  EXPECT_THROW(parse_config("cmt.layers = 1,1\n"), ParseError);
  EXPECT_THROW(parse_config("point.root_points = 0\n"), ParseError);
}
