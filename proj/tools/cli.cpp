#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "box_json.hpp"
#include "catdet/errors.hpp"
#include "catdet/evalkit/average_precision.hpp"
#include "catdet/kitti/config.hpp"
#include "catdet/kitti/formats.hpp"
#include "catdet/kitti/scene.hpp"
#include "catdet/omda/contrastive.hpp"
#include "catdet/omda/gt_paste.hpp"
#include "catdet/omda/object_db.hpp"
#include "catdet/pipeline/forward.hpp"
#include "catdet/pipeline/overfit.hpp"
#include "catdet/verify/gradient_suite.hpp"
#include "catdet/verify/invariants.hpp"
#include "catdet/verify/oracles.hpp"

namespace catdet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kPasteRecordFile = "paste.json";

std::string printf_str(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

kitti::RunConfig load_config(const std::string& path) {
  if (path.empty()) return kitti::RunConfig::preset("scaled");
  return kitti::parse_config(kitti::read_text_file(path));
}

void print_check(std::ostream& out, const verify::CheckResult& r) {
  out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
}

std::string gradcheck_line(const verify::GradcheckReport& r, std::size_t trials) {
  return printf_str("%s %-5s trials %zu max_rel_err %.3e (%.2f s)", r.passed ? "PASS" : "FAIL",
                    std::string(verify::loss_name(r.loss)).c_str(), trials, r.worst, r.seconds);
}

json record_json(const omda::PasteRecord& rec, const std::vector<omda::ObjectSample>& db, std::size_t points) {
  json pasted = json::array();
  for (std::size_t i = 0; i < rec.pasted.size(); ++i) {
    json b = box_json(rec.pasted[i]);
    b.erase("score");
    b["db_index"] = rec.db_indices[i];
    b["points"] = rec.point_counts[i];
    b["source"] = db[rec.db_indices[i]].source;
    pasted.push_back(b);
  }
  return {{"pasted", pasted},
          {"rejected", rec.rejected},
          {"first_point", rec.first_point},
          {"removed_points", rec.removed_points},
          {"points", points}};
}

// --- commands -------------------------------------------------------------

int cmd_selftest(std::ostream& out, std::uint64_t seed) {
  bool ok = true;
  const auto report = [&](const verify::CheckResult& r) {
    print_check(out, r);
    ok = ok && r.passed;
  };
  report(verify::check_fps());
  report(verify::check_ball_query());
  report(verify::check_rotated_iou(10, seed));
  report(verify::check_projection(200, seed));
  report(verify::check_ap_cases());
  report(verify::check_codec_identity(1000, seed));
  report(verify::check_trivial_detectors(seed));
  for (const auto& r : verify::run_invariants(seed)) report(r);
  for (verify::LossKind k : verify::kAllLosses) {
    verify::GradcheckOptions opt;
    opt.seed = seed;
    const auto r = verify::run_gradcheck(k, opt);
    out << gradcheck_line(r, opt.trials) << "\n";
    ok = ok && r.passed;
  }
  out << (ok ? "selftest passed" : "selftest FAILED") << "\n";
  return ok ? kExitOk : kExitVerification;
}

int cmd_gradcheck(std::ostream& out, const std::string& loss, std::size_t trials, std::uint64_t seed, double step) {
  std::vector<verify::LossKind> kinds;
  if (loss == "all") {
    kinds.assign(std::begin(verify::kAllLosses), std::end(verify::kAllLosses));
  } else if (auto k = verify::loss_from_name(loss)) {
    kinds.push_back(*k);
  } else {
    throw ArgumentError("unknown loss '" + loss + "' (expected clp, clo, focal, box, rcnn or all)");
  }
  bool ok = true;
  for (verify::LossKind k : kinds) {
    verify::GradcheckOptions opt;
    opt.trials = trials;
    opt.seed = seed;
    opt.step = step;
    const auto r = verify::run_gradcheck(k, opt);
    out << gradcheck_line(r, trials) << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitVerification;
}

int cmd_synth(std::ostream& out, const kitti::RunConfig& cfg, const std::string& dir) {
  const auto frame = pipeline::synthetic_frame(cfg);
  kitti::write_frame(dir, frame);
  out << json{{"frame", dir},
              {"points", frame.cloud.size()},
              {"objects", kitti::target_boxes(frame.labels).size()},
              {"image", {frame.image_width(), frame.image_height()}}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_build_db(std::ostream& out, const std::vector<std::string>& scenes, const std::string& dir, double margin) {
  std::vector<omda::ObjectSample> db;
  for (const auto& s : scenes) {
    const auto frame = kitti::read_frame(s);
    const auto boxes = kitti::target_boxes(frame.labels);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      auto sample = omda::crop_object(frame.cloud, boxes[i], fs::path(s).filename().string() + "#" + std::to_string(i), margin);
      if (sample.points.size() > 0) db.push_back(std::move(sample));
    }
  }
  omda::save_object_db(dir, db);
  std::array<std::size_t, kNumClasses> per_class{};
  for (const auto& s : db) ++per_class[static_cast<std::size_t>(s.class_id())];
  out << json{{"db", dir},
              {"objects", db.size()},
              {"per_class", {{"Car", per_class[kCar]}, {"Pedestrian", per_class[kPedestrian]}, {"Cyclist", per_class[kCyclist]}}}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_augment(std::ostream& out, const kitti::RunConfig& cfg, const std::string& scene_dir, const std::string& db_dir,
                std::uint64_t seed, const std::string& out_dir) {
  const auto frame = kitti::read_frame(scene_dir);
  const auto db = omda::load_object_db(db_dir);
  const auto res = omda::gt_paste({frame.cloud, kitti::target_boxes(frame.labels)}, db, {cfg.max_paste, seed});
  const json record = record_json(res.record, db, res.scene.cloud.size());
  if (!out_dir.empty()) {
    kitti::Frame augmented = frame;
    augmented.cloud = res.scene.cloud;
    for (const Box3D& b : res.record.pasted) augmented.labels.push_back(kitti::label_from_box(b, frame.calib));
    kitti::write_frame(out_dir, augmented);
    kitti::write_text_file(fs::path(out_dir) / kPasteRecordFile, record.dump(2) + "\n");
  }
  out << record.dump(2) << "\n";
  return kExitOk;
}

int cmd_pairs(std::ostream& out, const std::string& scene, const std::string& image_path, const std::string& calib_path,
              double threshold) {
  PointCloud cloud;
  fusion::Calibration calib;
  std::size_t width = 0, height = 0;
  // A velodyne file picks up label.txt and paste.json from its directory.
  const bool is_dir = fs::is_directory(scene);
  const fs::path dir = is_dir ? fs::path(scene) : fs::path(scene).parent_path();
  if (is_dir) {
    const auto frame = kitti::read_frame(scene);
    cloud = frame.cloud;
    calib = frame.calib;
    width = frame.image_width();
    height = frame.image_height();
  } else {
    if (calib_path.empty() || image_path.empty()) throw ArgumentError("pairs: a velodyne file needs --image and --calib");
    cloud = kitti::read_velodyne_file(scene);
  }
  if (!calib_path.empty()) calib = kitti::parse_calib(kitti::read_text_file(calib_path));
  if (!image_path.empty()) {
    const Tensor img = kitti::read_png(image_path);
    width = img.dim(2);
    height = img.dim(1);
  }
  if (!is_dir) {
    const fs::path labels = dir / "label.txt";
    if (!fs::exists(labels)) throw ArgumentError("pairs: no label.txt next to " + scene);
    kitti::label_points(cloud, kitti::target_boxes(kitti::parse_labels(kitti::read_text_file(labels), calib)));
  }
  std::size_t split = cloud.size();
  if (fs::exists(dir / kPasteRecordFile)) {
    const json rec = json::parse(kitti::read_text_file(dir / kPasteRecordFile));
    split = rec.at("first_point").get<std::size_t>();
    if (split > cloud.size()) throw ParseError("pairs: paste record points past the end of the cloud");
  }
  std::vector<std::size_t> raw_idx(split), pasted_idx(cloud.size() - split);
  for (std::size_t i = 0; i < split; ++i) raw_idx[i] = i;
  for (std::size_t i = split; i < cloud.size(); ++i) pasted_idx[i - split] = i;
  const PointCloud raw = select_points(cloud, raw_idx);
  const PointCloud pasted = pasted_idx.empty() ? PointCloud{} : select_points(cloud, pasted_idx);
  // Without a trained segmentation head the scores come from the labels.
  std::vector<double> scores(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) scores[i] = (*raw.class_id)[i] == kBackground ? 0.0 : 1.0;
  const auto pairs = omda::build_point_pairs(raw, pasted, calib, width, height, scores, threshold);
  const auto& d = pairs.diagnostics;
  std::size_t in_image = 0;
  for (bool b : pairs.in_image) in_image += b ? 1 : 0;
  out << json{{"threshold", threshold},
              {"raw_points", raw.size()},
              {"pasted_points", pasted.size()},
              {"in_image", in_image},
              {"anchors", pairs.problem.anchors.size()},
              {"raw_anchors", d.raw_anchors},
              {"pasted_anchors", d.pasted_anchors},
              {"positives", pairs.problem.positive_count()},
              {"negatives", pairs.problem.negative_count()},
              {"negative_groups", pairs.problem.negative_groups.size()},
              {"dropped_out_of_image", d.dropped_out_of_image},
              {"skipped_no_negatives", d.skipped_no_negatives},
              {"skipped_no_same_class", d.skipped_no_same_class},
              {"excluded_overlaps", d.excluded_overlaps},
              {"exclusive", pairs.exclusive()}}
             .dump(2)
      << "\n";
  return pairs.exclusive() ? kExitOk : kExitVerification;
}

// Velodyne binary, or text with x y z (comma or space separated) per line.
Tensor read_points(const std::string& path) {
  if (fs::path(path).extension() == ".bin") return kitti::read_velodyne_file(path).coords;
  const std::string text = kitti::read_text_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<double> xyz;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    if (line_no == 1 && first == "x") continue;  // header
    ls.clear();
    ls.str(line);
    double v[3];
    for (std::size_t k = 0; k < 3; ++k) {
      std::string tok;
      if (!(ls >> tok)) throw ParseError("expected 3 coordinates", line_no, k + 1);
      try {
        std::size_t used = 0;
        v[k] = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("unparsable number '" + tok + "'", line_no, k + 1);
      }
    }
    xyz.insert(xyz.end(), v, v + 3);
  }
  if (xyz.empty()) throw ParseError("no points in " + path);
  const std::size_t n = xyz.size() / 3;
  return Tensor({n, 3}, std::move(xyz));
}

int cmd_project(std::ostream& out, const std::string& calib_path, const std::string& points_path) {
  const auto calib = kitti::parse_calib(kitti::read_text_file(calib_path));
  const Tensor coords = read_points(points_path);
  out << "u,v,depth\n";
  for (const auto& p : fusion::project_points(calib, coords)) out << printf_str("%.6f,%.6f,%.6f\n", p.u, p.v, p.depth);
  return kExitOk;
}

int cmd_forward(std::ostream& out, const kitti::RunConfig& cfg, const std::string& frame_dir, bool as_json) {
  const auto frame = frame_dir.empty() ? pipeline::synthetic_frame(cfg) : kitti::read_frame(frame_dir);
  const auto run = pipeline::run_forward(cfg, frame);
  const auto& t = run.output.trace;
  if (as_json) {
    json maps = json::array();
    for (const auto& m : t.it_maps) maps.push_back({m[0], m[1]});
    out << json{{"point_counts", t.point_counts},
                {"pt_channels", t.pt_channels},
                {"it_channels", t.it_channels},
                {"it_maps", maps},
                {"tokens", t.tokens},
                {"cmt_active", t.cmt_active},
                {"out_of_image", t.out_of_image},
                {"output_width", t.output_width},
                {"fused_map", t.fused_map},
                {"init_seconds", run.init_seconds},
                {"forward_seconds", run.forward_seconds}}
               .dump(2)
        << "\n";
    return kExitOk;
  }
  const auto join = [](const auto& v, const char* sep) {
    std::ostringstream os;
    bool first = true;
    for (const auto& x : v) {
      os << (first ? "" : sep) << x;
      first = false;
    }
    return os.str();
  };
  out << "points        " << join(t.point_counts, " -> ") << "\n";
  out << "pt channels   " << join(t.pt_channels, " ") << "\n";
  out << "it channels   " << join(t.it_channels, " ") << "\n";
  std::vector<std::string> maps;
  for (const auto& m : t.it_maps) maps.push_back(std::to_string(m[0]) + "x" + std::to_string(m[1]));
  out << "it maps       " << join(maps, " ") << "\n";
  out << "tokens        " << join(t.tokens, " ") << "\n";
  std::vector<std::string> active;
  for (std::size_t l = 0; l < t.cmt_active.size(); ++l) {
    if (t.cmt_active[l]) active.push_back(std::to_string(l + 1));
  }
  out << "cmt layers    " << join(active, " ") << "\n";
  out << "out of image  " << join(t.out_of_image, " ") << "\n";
  out << "output width  " << t.output_width << "\n";
  out << "fused map     " << t.fused_map[0] << "x" << t.fused_map[1] << "x" << t.fused_map[2] << "\n";
  out << printf_str("timing        init %.2f s, forward %.2f s\n", run.init_seconds, run.forward_seconds);
  return kExitOk;
}

int cmd_overfit(std::ostream& out, const kitti::RunConfig& cfg, std::size_t steps, double lr, std::size_t every) {
  pipeline::OverfitOptions opt;
  opt.config = cfg;
  opt.steps = steps;
  opt.lr = lr;
  out << "step        seg         pg       rcnn     cl_point    cl_object        total  accuracy\n";
  const auto report = pipeline::run_overfit(opt, [&](const pipeline::StepRecord& s) {
    if (s.step % every != 0 && s.step != steps) return;
    out << printf_str("%4zu %10.4f %10.4f %10.4f %12.4f %12.4f %12.4f %9.4f\n", s.step, s.seg, s.pg, s.rcnn,
                      s.cl_point, s.cl_object, s.total, s.accuracy);
  });
  const auto& a = report.initial();
  const auto& b = report.final();
  const double drop = a.total != 0 ? 100.0 * (a.total - b.total) / std::abs(a.total) : 0.0;
  out << printf_str("points %zu (%zu pasted from %zu objects), %zu point anchors, %zu proposals\n", report.points,
                    report.pasted_points, report.pasted_objects, report.point_anchors, report.proposals);
  out << printf_str("total %.4f -> %.4f (%.1f%% decrease), accuracy %.4f -> %.4f, %.2f s\n", a.total, b.total, drop,
                    a.accuracy, b.accuracy, report.seconds);
  return kExitOk;
}

int cmd_eval(std::ostream& out, const std::string& dets_path, const std::string& gts_path, std::size_t recall,
             std::size_t jobs, const std::string& metric, const std::string& out_dir) {
  eval::EvalConfig cfg;
  cfg.recall_positions = recall;
  cfg.jobs = jobs;
  if (metric == "3d") {
    cfg.metric = eval::IouMetric::k3d;
  } else if (metric == "bev") {
    cfg.metric = eval::IouMetric::kBev;
  } else {
    throw ArgumentError("unknown metric '" + metric + "' (expected 3d or bev)");
  }
  cfg.validate();
  const auto dets = parse_frame_boxes(kitti::read_text_file(dets_path));
  const auto gts = parse_frame_boxes(kitti::read_text_file(gts_path));
  out << printf_str("%-10s %6s %6s %6s %9s\n", "class", "gt", "dets", "tp", ("AP@" + std::to_string(recall)).c_str());
  if (!out_dir.empty()) fs::create_directories(out_dir);
  for (int c = 0; c < kNumClasses; ++c) {
    const auto res = eval::average_precision(dets, gts, c, cfg);
    const std::string name(class_name(c));
    out << printf_str("%-10s %6zu %6zu %6zu %9s\n", name.c_str(), res.gt_count, res.detections, res.true_positives,
                      res.ap ? printf_str("%.4f", *res.ap).c_str() : "n/a");
    if (!res.curve.empty() && !out_dir.empty()) {
      const fs::path base = fs::path(out_dir) / ("pr_" + name);
      eval::emit_pr_curve(res.curve, base.string() + ".csv", base.string() + ".svg");
    }
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"catdet: camera-LiDAR 3D detection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "catdet 0.1.0");

  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Key-value config file (default: scaled preset)")->check(CLI::ExistingFile);
  };
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "RNG seed (overrides the config)");
  };

  auto* selftest = app.add_subcommand("selftest", "Run every oracle, invariant and gradient check");
  add_common(selftest);
  add_seed(selftest);

  std::string loss = "all";
  std::size_t trials = 20;
  double step = verify::GradcheckOptions{}.step;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic loss gradients with central differences");
  add_common(gradcheck);
  add_seed(gradcheck);
  gradcheck->add_option("--loss", loss, "clp, clo, focal, box, rcnn or all")->capture_default_str();
  gradcheck->add_option("--trials", trials, "Random configurations per loss")->capture_default_str()->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", step, "Finite-difference step")->capture_default_str()->check(CLI::Range(1e-7, 1e-3));

  std::string out_path;
  auto* synth = app.add_subcommand("synth", "Write a synthetic frame directory");
  add_common(synth);
  add_seed(synth);
  synth->add_option("--out", out_path, "Output frame directory")->required();

  std::vector<std::string> scenes;
  double margin = 0.0;
  auto* build_db = app.add_subcommand("build-db", "Crop labelled objects from frames into an object database");
  add_common(build_db);
  build_db->add_option("--scene", scenes, "Frame directory (repeatable)")->required()->check(CLI::ExistingDirectory);
  build_db->add_option("--out", out_path, "Database directory")->required();
  build_db->add_option("--margin", margin, "Box growth when cropping, metres")->capture_default_str();

  std::string scene_path, db_path;
  auto* augment = app.add_subcommand("augment", "Paste database objects into a scene");
  add_common(augment);
  add_seed(augment);
  augment->add_option("--scene", scene_path, "Frame directory")->required()->check(CLI::ExistingDirectory);
  augment->add_option("--db", db_path, "Object database directory")->required()->check(CLI::ExistingDirectory);
  augment->add_option("--out", out_path, "Output frame directory");

  std::string image_path, calib_path;
  double threshold = 0.3;
  bool threshold_given = false;
  auto* pairs = app.add_subcommand("pairs", "Point-level contrastive pair statistics");
  add_common(pairs);
  pairs->add_option("--scene", scene_path, "Frame directory or velodyne file")->required()->check(CLI::ExistingPath);
  pairs->add_option("--image", image_path, "PNG image (overrides the frame's)")->check(CLI::ExistingFile);
  pairs->add_option("--calib", calib_path, "Calibration text (overrides the frame's)")->check(CLI::ExistingFile);
  pairs->add_option_function<double>(
           "-t,--threshold", [&](const double& t) { threshold = t, threshold_given = true; },
           "Foreground score threshold for negatives")
      ->check(CLI::Range(0.0, 1.0));

  std::string points_path;
  auto* project = app.add_subcommand("project", "Project LiDAR points into the image");
  add_common(project);
  project->add_option("--calib", calib_path, "Calibration text")->required()->check(CLI::ExistingFile);
  project->add_option("--points", points_path, "Velodyne .bin or x,y,z text")->required()->check(CLI::ExistingFile);

  std::string frame_path;
  bool as_json = false;
  auto* forward = app.add_subcommand("forward", "Two-stream forward pass with shape trace and timing");
  add_common(forward);
  add_seed(forward);
  forward->add_option("--frame", frame_path, "Frame directory (default: synthetic scene)")->check(CLI::ExistingDirectory);
  forward->add_flag("--json", as_json, "Print the trace as JSON");

  std::size_t steps = 200, every = 10;
  double lr = pipeline::OverfitOptions{}.lr;
  auto* overfit = app.add_subcommand("overfit", "Fit the heads and projectors to one synthetic frame");
  add_seed(overfit);
  overfit->add_option("--spec,--config", config_path, "Key-value config file")->check(CLI::ExistingFile);
  overfit->add_option("--steps", steps, "Gradient steps")->capture_default_str();
  overfit->add_option("--lr", lr, "Head learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  overfit->add_option("--every", every, "Print every N steps")->capture_default_str()->check(CLI::PositiveNumber);

  std::string dets_path, gts_path, metric = "3d", pr_dir = ".";
  std::size_t recall = 11, jobs = 1;
  auto* evaluate = app.add_subcommand("eval", "Average precision table and PR curves");
  add_common(evaluate);
  evaluate->add_option("--dets", dets_path, "Detections JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gts", gts_path, "Ground truth JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--recall", recall, "Recall positions")->capture_default_str()->check(CLI::IsMember({11, 40}));
  evaluate->add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  evaluate->add_option("--metric", metric, "3d or bev")->capture_default_str();
  evaluate->add_option("--out-dir", pr_dir, "Directory for pr_<class>.csv/.svg")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    kitti::RunConfig cfg = load_config(config_path);
    if (seed_given) {
      cfg.seed = seed;
      cfg.scene.seed = seed;
    } else {
      seed = cfg.seed;
    }
    if (threshold_given) cfg.threshold = threshold;

    if (*selftest) return cmd_selftest(out, seed);
    if (*gradcheck) return cmd_gradcheck(out, loss, trials, seed, step);
    if (*synth) return cmd_synth(out, cfg, out_path);
    if (*build_db) return cmd_build_db(out, scenes, out_path, margin);
    if (*augment) return cmd_augment(out, cfg, scene_path, db_path, seed, out_path);
    if (*pairs) return cmd_pairs(out, scene_path, image_path, calib_path, cfg.threshold);
    if (*project) return cmd_project(out, calib_path, points_path);
    if (*forward) return cmd_forward(out, cfg, frame_path, as_json);
    if (*overfit) return cmd_overfit(out, cfg, steps, lr, every);
    if (*evaluate) return cmd_eval(out, dets_path, gts_path, recall, jobs, metric, pr_dir);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace catdet::cli
