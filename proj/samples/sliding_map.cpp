// Stream a synthetic scene through the voxel map and a sliding window:
// insert each keyframe, extract planes, solve, then marginalize the oldest.

#include <cstdio>

#include "rsoba/rsoba.hpp"

int main() {
  using namespace rsoba;

  synthetic::SceneSpec spec;
  spec.frames = 15;
  spec.planes = 12;
  spec.points_per_plane = 400;
  spec.sigma = 0.01;
  spec.min_separation = 1.8;
  const auto scene = synthetic::generate(spec);
  const auto odometry = synthetic::perturb_poses(scene.poses, 0.03, 0.01, 3, std::vector<std::size_t>{0});

  constexpr std::size_t kWindow = 5;
  VoxelMap map;
  const HuberKernel kernel = HuberKernel::with_threshold(0.02);
  for (std::size_t k = 0; k < scene.poses.size(); ++k) {
    map.insert_frame(k, scene.stamps[k], scene.frame_points(k), odometry[k]);
    map.fit_pending();
    if (map.keyframes().size() < kWindow) continue;

    const SolveResult res = lm_iterate(map.build_window(), kernel, LmConfig{});
    const Keyframe& oldest = res.window.frames.front();
    std::printf("frame %2zu: landmarks=%3zu cost %.3e -> %.3e  oldest=%zu error=%.4f m\n", k,
                res.window.landmarks.size(), res.report.initial_cost, res.report.final_cost,
                static_cast<std::size_t>(oldest.id), (oldest.pose.t - scene.poses[oldest.id].t).norm());
    map.slide(res.window);
  }
}
