/**
 * \file app.hpp
 * \brief The simulate / optimize / evaluate runs behind the command line tool.
 *
 * Scene / dataset directory layout:
 *   frames/NNNNNN.xyz   local points of each frame, "x y z" per line
 *   init.tum            initial (odometry) trajectory, one line per frame
 *   gt.tum              ground truth (synthetic scenes only)
 *   spec.cfg            simulation parameters as key=value
 */
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsoba/config.hpp"
#include "rsoba/evaluation.hpp"
#include "rsoba/solver.hpp"
#include "rsoba/synthetic.hpp"
#include "rsoba/trajectory.hpp"
#include "rsoba/voxel_map.hpp"

namespace rsoba::app {

namespace fs = std::filesystem;

enum ExitCode : int { kSuccess = 0, kDiverged = 1, kInvalidInput = 2 };

inline std::string frame_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu.xyz", i);
  return buf;
}

inline Trajectory make_trajectory(const std::vector<double>& stamps, const std::vector<Pose>& poses) {
  Trajectory t;
  for (std::size_t i = 0; i < poses.size(); ++i) t.push_back(stamps[i], poses[i]);
  return t;
}

/// Generates a scene and writes it to `out_dir`. The first pose of the
/// initial trajectory is left at ground truth; it anchors the map frame.
inline synthetic::Scene cmd_simulate(const Config& cfg, const fs::path& out_dir) {
  const synthetic::Scene scene = synthetic::generate(cfg.scene());
  const std::size_t keep[] = {0};
  const auto init = synthetic::perturb_poses(scene.poses, cfg.get_double("sim.perturb_trans"),
                                             cfg.get_double("sim.perturb_rot"), scene.spec.seed, keep);
  fs::create_directories(out_dir / "frames");
  for (std::size_t i = 0; i < scene.poses.size(); ++i)
    write_file_atomic(out_dir / "frames" / frame_file_name(i), to_xyz(scene.frame_points(i)));
  write_tum(out_dir / "gt.tum", make_trajectory(scene.stamps, scene.poses));
  write_tum(out_dir / "init.tum", make_trajectory(scene.stamps, init));
  write_file_atomic(out_dir / "spec.cfg", cfg.to_text("sim.") + "seed=" + cfg.get("seed") + "\n");
  return scene;
}

inline std::vector<fs::path> list_frames(const fs::path& dir) {
  const fs::path frames = dir / "frames";
  if (!fs::is_directory(frames)) throw InvalidInputError("missing frames/ directory in " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(frames))
    if (e.is_regular_file() && e.path().extension() == ".xyz") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline nlohmann::json to_json(const SolveReport& r) {
  return {{"iterations", r.iterations},     {"initial_cost", r.initial_cost},
          {"final_cost", r.final_cost},     {"cost_trace", r.cost_trace},
          {"lambda_trace", r.lambda_trace}, {"accepted", r.accepted},
          {"converged", r.converged},       {"termination", r.termination}};
}

struct OptimizeSummary {
  Trajectory estimate;
  std::vector<SolveReport> solves;
  std::size_t keyframes = 0;
  std::size_t landmarks = 0;
  std::optional<double> ate_rmse;
};

/**
 * Sliding-window back end over a directory of frames plus an initial
 * trajectory: gate keyframes, insert them into the voxel map at the predicted
 * pose, and once the window is full solve it, update the odometry-to-map
 * correction from the newest keyframe and marginalize the oldest one.
 *
 * Writes est.tum and report.json to `out_dir`. Throws DivergenceError on a
 * non-finite cost.
 */
inline OptimizeSummary cmd_optimize(const Config& cfg, const fs::path& input_dir, const fs::path& out_dir) {
  const auto frame_files = list_frames(input_dir);
  const Trajectory odom = read_tum(input_dir / "init.tum");
  if (odom.size() != frame_files.size())
    throw InvalidInputError("init.tum has " + std::to_string(odom.size()) + " poses but there are " +
                            std::to_string(frame_files.size()) + " frames");
  const long long window_size = cfg.get_int("window.size");
  if (window_size < 1) throw InvalidInputError("window.size must be at least 1");

  const HuberKernel kernel = cfg.kernel();
  const LmConfig lm = cfg.lm();
  VoxelMap map(cfg.voxel_map());
  KeyframeGate gate;
  gate.enabled = cfg.get_bool("keyframe.gating");
  gate.th_time = cfg.get_double("keyframe.th_time");
  gate.th_pos = cfg.get_double("keyframe.th_pos");
  gate.th_deg = cfg.get_double("keyframe.th_deg");

  OptimizeSummary summary;
  std::vector<std::optional<Pose>> estimate(odom.size());
  std::map<FrameId, Pose> keyframe_odom;
  Pose map_from_odom = Pose::identity();

  auto solve = [&](bool slide_after) {
    Window w = map.build_window();
    SolveResult res = lm_iterate(w, kernel, lm);
    summary.solves.push_back(res.report);
    map.apply(res.window);
    const Keyframe& newest = res.window.frames.back();
    map_from_odom = compose(newest.pose, invert(keyframe_odom.at(newest.id)));
    if (!slide_after) {
      for (const auto& f : res.window.frames) estimate[f.id] = f.pose;
      return;
    }
    const Keyframe& oldest = res.window.frames.front();
    estimate[oldest.id] = oldest.pose;
    map.slide(res.window);
  };

  for (std::size_t k = 0; k < frame_files.size(); ++k) {
    const auto& [stamp, odom_pose] = odom[k];
    const Pose predicted = compose(map_from_odom, odom_pose);
    if (!gate.accept(stamp, odom_pose)) {
      estimate[k] = predicted;
      continue;
    }
    ++summary.keyframes;
    keyframe_odom[k] = odom_pose;
    const auto points = read_xyz(frame_files[k]);
    map.insert_frame(k, stamp, points, predicted);
    map.fit_pending();
    if (static_cast<long long>(map.keyframes().size()) >= window_size) solve(true);
  }
  if (!map.keyframes().empty()) solve(false);
  summary.landmarks = map.landmarks().size();

  for (std::size_t k = 0; k < odom.size(); ++k) summary.estimate.push_back(odom[k].stamp, *estimate[k]);

  if (fs::exists(input_dir / "gt.tum"))
    summary.ate_rmse = ate_rmse(summary.estimate, read_tum(input_dir / "gt.tum"), cfg.ate());

  fs::create_directories(out_dir);
  write_tum(out_dir / "est.tum", summary.estimate);
  nlohmann::json report;
  report["keyframes"] = summary.keyframes;
  report["landmarks"] = summary.landmarks;
  report["windows"] = nlohmann::json::array();
  for (const auto& r : summary.solves) report["windows"].push_back(to_json(r));
  if (summary.ate_rmse) report["ate_rmse"] = *summary.ate_rmse;
  report["config"] = cfg.to_text();
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  return summary;
}

struct EvaluateSummary {
  AteResult ate;
  std::optional<std::size_t> occupancy;

  /// key=value lines.
  std::string text() const {
    char buf[128];
    std::string out;
    std::snprintf(buf, sizeof(buf), "ate_rmse=%.9f\n", ate.rmse);
    out += buf;
    out += "ate_pairs=" + std::to_string(ate.pairs) + "\n";
    if (occupancy) out += "voxel_occupancy=" + std::to_string(*occupancy) + "\n";
    return out;
  }
};

/// ATE of `est` against `ref`; voxel occupancy of the frame clouds placed at
/// the estimated poses when a frames directory is given.
inline EvaluateSummary cmd_evaluate(const Config& cfg, const fs::path& est, const fs::path& ref,
                                    const std::optional<fs::path>& clouds = std::nullopt) {
  EvaluateSummary s;
  const Trajectory estimate = read_tum(est);
  s.ate = ate(estimate, read_tum(ref), cfg.ate());
  if (clouds) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(*clouds))
      if (e.is_regular_file() && e.path().extension() == ".xyz") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.size() != estimate.size())
      throw InvalidInputError("cloud count does not match the estimated trajectory");
    std::vector<Eigen::Vector3d> cloud;
    for (std::size_t i = 0; i < files.size(); ++i) {
      const Eigen::Matrix4d t = estimate[i].pose.matrix();
      for (const auto& p : read_xyz(files[i])) cloud.push_back((t * p.homogeneous()).head<3>());
    }
    if (cloud.empty()) throw InvalidInputError("clouds contain no points");
    s.occupancy = voxel_occupancy(cloud, cfg.get_double("eval.voxel_size"));
  }
  return s;
}

}  // namespace rsoba::app
