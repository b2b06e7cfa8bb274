#include <gtest/gtest.h>

#include <filesystem>
#include <json.hpp>
#include <random>
#include <sstream>

#include "box_json.hpp"
#include "catdet/errors.hpp"
#include "catdet/kitti/formats.hpp"
#include "cli.hpp"

using namespace catdet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "catdet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("catdet_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    kitti::write_text_file(dir_ / name, text);
    return path(name);
  }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"nonsense"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"gradcheck", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"gradcheck", "--trials", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"gradcheck", "--loss", "dice"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"synth"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"project", "--calib", path("none.txt"), "--points", path("none.bin")}).code, cli::kExitUsage);
}

TEST_F(CliTest, HelpAndVersionExitWithZero) {
  const Result help = run({"--help"});
  EXPECT_EQ(help.code, cli::kExitOk);
  EXPECT_NE(help.out.find("gradcheck"), std::string::npos);
  EXPECT_EQ(run({"--version"}).code, cli::kExitOk);
}

TEST_F(CliTest, BadConfigReportsLine) {
  const std::string cfg = write("bad.cfg", "seed = 1\ntau = x\n");
  const Result r = run({"synth", "--config", cfg, "--out", path("f")});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, Gradcheck) {
  const Result r = run({"gradcheck", "--loss", "focal", "--trials", "3"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
  EXPECT_NE(r.out.find("focal"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--step", "1"}).code, cli::kExitUsage);
}

TEST_F(CliTest, Selftest) {
  const Result r = run({"selftest"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out;
  EXPECT_NE(r.out.find("selftest passed"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL "), std::string::npos);
}

TEST_F(CliTest, SynthDatabaseAugmentPairs) {
  Result r = run({"synth", "--seed", "1", "--out", path("a")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json synth = json::parse(r.out);
  EXPECT_EQ(synth["objects"], 2);  // scaled preset: one car, one pedestrian
  for (const char* f : {"velodyne.bin", "image.png", "calib.txt", "label.txt"}) EXPECT_TRUE(fs::exists(dir_ / "a" / f));
  ASSERT_EQ(run({"synth", "--seed", "2", "--out", path("b")}).code, cli::kExitOk);

  r = run({"build-db", "--scene", path("a"), "--scene", path("b"), "--out", path("db")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json db = json::parse(r.out);
  EXPECT_EQ(db["objects"], 4);
  EXPECT_EQ(db["per_class"]["Car"], 2);

  r = run({"augment", "--scene", path("a"), "--db", path("db"), "--seed", "3", "--out", path("aug")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "aug" / "paste.json"));
  // Same seed, same record.
  const Result again = run({"augment", "--scene", path("a"), "--db", path("db"), "--seed", "3"});
  EXPECT_EQ(again.out, r.out);

  r = run({"pairs", "--scene", path("aug")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json pairs = json::parse(r.out);
  EXPECT_TRUE(pairs["exclusive"].get<bool>());
  EXPECT_GT(pairs["anchors"].get<int>(), 0);
  EXPECT_EQ(pairs["raw_points"].get<std::size_t>() + pairs["pasted_points"].get<std::size_t>(),
            kitti::read_velodyne_file(dir_ / "aug" / "velodyne.bin").size());

  r = run({"pairs", "--scene", path("aug/velodyne.bin"), "--image", path("aug/image.png"), "--calib",
           path("aug/calib.txt")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["anchors"], pairs["anchors"]);
  EXPECT_EQ(run({"pairs", "--scene", path("aug/velodyne.bin")}).code, cli::kExitUsage);
}

TEST_F(CliTest, Project) {
  const std::string calib = write("calib.txt",
                                  "P2: 10 0 50 0 0 10 50 0 0 0 1 0\n"
                                  "R0_rect: 1 0 0 0 1 0 0 0 1\n"
                                  "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n");
  const std::string pts = write("pts.txt", "x,y,z\n0,0,2\n1 2 4\n");
  const Result r = run({"project", "--calib", calib, "--points", pts});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(r.out, "u,v,depth\n50.000000,50.000000,2.000000\n52.500000,55.000000,4.000000\n");

  const Result bad = run({"project", "--calib", calib, "--points", write("bad.txt", "1,2\n")});
  EXPECT_EQ(bad.code, cli::kExitUsage);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos) << bad.err;
}

TEST_F(CliTest, ForwardJson) {
  const Result r = run({"forward", "--json"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json t = json::parse(r.out);
  EXPECT_EQ(t["point_counts"], json({256, 64, 16, 8, 4, 8, 16, 64, 256}));
  EXPECT_EQ(t["output_width"], 32);
}

TEST_F(CliTest, OverfitShortRun) {
  const Result r = run({"overfit", "--steps", "5", "--every", "5"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("total "), std::string::npos);
}

TEST_F(CliTest, EvalTableAndCurves) {
  const std::string gts = write("gts.json",
                                R"({"frames": [[{"class": "Car", "box": [10, 0, -1, 1.5, 1.6, 3.9, 0]}]]})");
  const std::string perfect = write("dets.json",
                                    R"([[{"class": "Car", "box": [10, 0, -1, 1.5, 1.6, 3.9, 0], "score": 0.9}]])");
  Result r = run({"eval", "--dets", perfect, "--gts", gts, "--recall", "40", "--out-dir", path("pr")});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("100.00"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "pr" / "pr_Car.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "pr" / "pr_Car.svg"));

  EXPECT_EQ(run({"eval", "--dets", perfect, "--gts", gts, "--recall", "12"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--dets", write("broken.json", "[[{"), "--gts", gts}).code, cli::kExitUsage);
}

TEST(BoxJson, ParsesBothLayoutsAndRoundTrips) {
  const auto a = cli::parse_frame_boxes(R"({"frames": [[{"class": "Cyclist", "box": [1, 2, 3, 4, 5, 6, 0.5]}], []]})");
  ASSERT_EQ(a.size(), 2u);
  ASSERT_EQ(a[0].size(), 1u);
  EXPECT_EQ(a[0][0].class_id, kCyclist);
  EXPECT_DOUBLE_EQ(a[0][0].score, 1.0);
  EXPECT_DOUBLE_EQ(a[0][0].theta, 0.5);
  EXPECT_TRUE(a[1].empty());

  const auto b = cli::parse_frame_boxes(cli::frame_boxes_json(a).dump());
  ASSERT_EQ(b.size(), 2u);
  EXPECT_DOUBLE_EQ(b[0][0].l, 6.0);
  EXPECT_EQ(b[0][0].class_id, kCyclist);

  EXPECT_THROW(cli::parse_frame_boxes(R"([[{"class": "Car", "box": [1, 2, 3]}]])"), ParseError);
  EXPECT_THROW(cli::parse_frame_boxes(R"([[{"class": "Tram", "box": [1, 2, 3, 4, 5, 6, 0]}]])"), Error);
  EXPECT_THROW(cli::parse_frame_boxes("{"), ParseError);
}
