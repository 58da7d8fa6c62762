#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rsoba/evaluation.hpp"
#include "rsoba/synthetic.hpp"
#include "rsoba/trajectory.hpp"

namespace rsoba {
namespace {

using synthetic::detail::uniform;

Trajectory line_trajectory(int n) {
  Trajectory t;
  for (int i = 0; i < n; ++i) {
    Pose p;
    p.t = Eigen::Vector3d(0.5 * i, 0, 0);
    t.push_back(0.1 * i, p);
  }
  return t;
}

Trajectory transformed(const Trajectory& t, const Pose& g) {
  Trajectory out;
  for (const auto& sp : t.poses()) out.push_back(sp.stamp, compose(g, sp.pose));
  return out;
}

/// Nine poses on a line, the middle one displaced 0.3 m sideways.
Trajectory displaced_fixture() {
  Trajectory t;
  for (int i = 0; i < 9; ++i) {
    Pose p;
    p.t = Eigen::Vector3d(0.5 * i, i == 4 ? 0.3 : 0.0, 0);
    t.push_back(0.1 * i, p);
  }
  return t;
}

TEST(Ate, IdenticalTrajectoriesGiveZero) {
  const Trajectory t = line_trajectory(10);
  for (Alignment a : {Alignment::kSe3, Alignment::kTranslation, Alignment::kNone})
    EXPECT_NEAR(ate_rmse(t, t, {a}), 0.0, 1e-12);
}

TEST(Ate, RigidShiftIsRemoved) {
  synthetic::SceneSpec spec;
  spec.frames = 20;
  const auto scene = synthetic::generate(spec);
  Trajectory ref;
  for (std::size_t i = 0; i < scene.poses.size(); ++i) ref.push_back(scene.stamps[i], scene.poses[i]);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const Pose g{Eigen::Vector3d(uniform(rng, -10, 10), uniform(rng, -10, 10), uniform(rng, -10, 10)),
                 Eigen::Vector3d(uniform(rng, -3, 3), uniform(rng, -1.5, 1.5), uniform(rng, -3, 3))};
    EXPECT_LT(ate_rmse(transformed(ref, g), ref), 1e-9);
  }
}

TEST(Ate, TranslationOnlyAlignmentRemovesShift) {
  const Trajectory t = line_trajectory(5);
  const Pose shift{Eigen::Vector3d(1, -2, 3), Eigen::Vector3d::Zero()};
  EXPECT_LT(ate_rmse(transformed(t, shift), t, {Alignment::kTranslation}), 1e-12);
  EXPECT_NEAR(ate_rmse(transformed(t, shift), t, {Alignment::kNone}), std::sqrt(14.0), 1e-12);
}

TEST(Ate, DisplacedPoseFixtureWithoutAlignment) {
  const Trajectory ref = line_trajectory(9);
  const AteResult r = ate(displaced_fixture(), ref, {Alignment::kNone});
  EXPECT_EQ(r.alignment, Eigen::Matrix4d::Identity());
  EXPECT_NEAR(r.rmse, std::sqrt(0.09 / 9.0), 1e-12);
  EXPECT_NEAR(r.rmse, 0.1, 1e-12);
}

// Least-squares alignment absorbs the mean displacement 0.3/9 of the fixture:
// residuals are 8 × (1/30) and one 0.3 − 1/30, so RMSE = sqrt(0.08/9).
TEST(Ate, DisplacedPoseFixtureWithAlignment) {
  const Trajectory ref = line_trajectory(9);
  const double expected = std::sqrt(0.08 / 9.0);
  EXPECT_NEAR(ate_rmse(displaced_fixture(), ref, {Alignment::kTranslation}), expected, 1e-12);
  EXPECT_NEAR(ate_rmse(displaced_fixture(), ref, {Alignment::kSe3}), expected, 1e-9);
}

TEST(Ate, AssociationUsesTolerance) {
  const Trajectory ref = line_trajectory(6);
  Trajectory est;
  for (const auto& sp : ref.poses()) est.push_back(sp.stamp + 0.015, sp.pose);
  EXPECT_EQ(ate(est, ref).pairs, 6u);
  Trajectory late;
  for (const auto& sp : ref.poses()) late.push_back(sp.stamp + 0.03, sp.pose);
  EXPECT_THROW(ate(late, ref), InvalidInputError);
  EXPECT_EQ(ate(late, ref, {Alignment::kSe3, 0.05}).pairs, 6u);
}

TEST(Ate, TooFewPairsThrows) {
  EXPECT_THROW(ate_rmse(line_trajectory(1), line_trajectory(1)), InvalidInputError);
  EXPECT_THROW(ate_rmse(Trajectory{}, line_trajectory(3)), InvalidInputError);
}

TEST(Occupancy, SinglePointAndSameCell) {
  const std::vector<Eigen::Vector3d> one = {Eigen::Vector3d(0.31, -0.42, 7.0)};
  EXPECT_EQ(voxel_occupancy(one), 1u);
  const std::vector<Eigen::Vector3d> two = {Eigen::Vector3d(0.02, 0.05, 0.05), Eigen::Vector3d(0.07, 0.05, 0.05)};
  EXPECT_EQ(voxel_occupancy(two), 1u);
  const std::vector<Eigen::Vector3d> straddle = {Eigen::Vector3d(-0.01, 0, 0), Eigen::Vector3d(0.01, 0, 0)};
  EXPECT_EQ(voxel_occupancy(straddle), 2u);
}

TEST(Occupancy, MonotoneUnderUnion) {
  std::mt19937_64 rng(2);
  std::vector<Eigen::Vector3d> pts;
  std::size_t prev = 0;
  for (int k = 0; k < 500; ++k) {
    pts.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const std::size_t now = voxel_occupancy(pts);
    EXPECT_GE(now, prev);
    prev = now;
  }
}

TEST(Occupancy, PerturbedPosesBlurTheMap) {
  synthetic::SceneSpec spec;
  spec.frames = 8;
  spec.planes = 12;
  spec.points_per_plane = 300;
  const auto scene = synthetic::generate(spec);
  const auto bad = synthetic::perturb_poses(scene.poses, 0.2, 0.0, 3);
  auto cloud = [&](const std::vector<Pose>& poses) {
    std::vector<Eigen::Vector3d> out;
    for (std::size_t i = 0; i < poses.size(); ++i)
      for (const auto& p : scene.frame_points(i)) out.push_back((poses[i].matrix() * p.homogeneous()).head<3>());
    return out;
  };
  EXPECT_GT(voxel_occupancy(cloud(bad)), voxel_occupancy(cloud(scene.poses)));
}

TEST(Occupancy, NonPositiveVoxelThrows) {
  const std::vector<Eigen::Vector3d> one = {Eigen::Vector3d::Zero()};
  EXPECT_THROW(voxel_occupancy(one, 0.0), DomainError);
}

TEST(Tum, RoundTrip) {
  synthetic::SceneSpec spec;
  const auto scene = synthetic::generate(spec);
  Trajectory t;
  for (std::size_t i = 0; i < scene.poses.size(); ++i) t.push_back(scene.stamps[i], scene.poses[i]);
  std::istringstream in(to_tum(t));
  const Trajectory back = parse_tum(in);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(back[i].stamp, t[i].stamp, 1e-9);
    EXPECT_LT((back[i].pose.matrix() - t[i].pose.matrix()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Tum, CommentsAndMalformedLines) {
  std::istringstream ok("# header\n\n0.0 1 2 3 0 0 0 1\n  # indented comment\n0.5 1 2 3 0 0 0 1\n");
  EXPECT_EQ(parse_tum(ok).size(), 2u);
  std::istringstream bad("0.0 1 2 3 0 0\n");
  EXPECT_THROW(parse_tum(bad), InvalidInputError);
  std::istringstream zero_q("0.0 1 2 3 0 0 0 0\n");
  EXPECT_THROW(parse_tum(zero_q), InvalidInputError);
  std::istringstream unordered("1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n");
  EXPECT_THROW(parse_tum(unordered), InvalidInputError);
}

}  // namespace
}  // namespace rsoba
