#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <vector>

#include "rsoba/group_metrics.hpp"
#include "rsoba/synthetic.hpp"

namespace rsoba {
namespace {

using synthetic::detail::uniform;

std::vector<Eigen::Vector3d> random_points(std::mt19937_64& rng, int n, double scale = 3.0) {
  std::vector<Eigen::Vector3d> out;
  for (int i = 0; i < n; ++i)
    out.emplace_back(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
  return out;
}

Pose random_pose(std::mt19937_64& rng) {
  return {Eigen::Vector3d(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)),
          Eigen::Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1))};
}

Plane random_plane(std::mt19937_64& rng) { return {synthetic::detail::unit_vector(rng), uniform(rng, -3, 3)}; }

TEST(Accumulate, OriginPointFillsOnlyTheCorner) {
  const GroupMatrix g = accumulate(GroupMatrix{}, HomoPoint(Eigen::Vector3d::Zero()));
  Eigen::Matrix4d expected = Eigen::Matrix4d::Zero();
  expected(3, 3) = 1.0;
  EXPECT_EQ(g.matrix(), expected);
  EXPECT_EQ(g.count(), 1);
}

TEST(Accumulate, SamePointTwiceDoublesOuterProduct) {
  const HomoPoint p(Eigen::Vector3d(1.5, -2.0, 0.25));
  const GroupMatrix g = accumulate(accumulate(GroupMatrix{}, p), p);
  EXPECT_EQ(g.matrix(), 2.0 * p.p * p.p.transpose());
  EXPECT_EQ(g.count(), 2);
}

TEST(Accumulate, MatchesStackedPointMatrixProduct) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 100);
  Eigen::MatrixXd stacked(100, 4);
  for (int k = 0; k < 100; ++k) stacked.row(k) << pts[k].x(), pts[k].y(), pts[k].z(), 1.0;
  const Eigen::Matrix4d oracle = stacked.transpose() * stacked;
  const GroupMatrix g = GroupMatrix::from_points(pts);
  EXPECT_LT((g.matrix() - oracle).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(g.count(), 100);
  EXPECT_TRUE(g.is_consistent());
}

TEST(Merge, ZeroIsNeutralAndOrderDoesNotMatter) {
  std::mt19937_64 rng(2);
  const GroupMatrix a = GroupMatrix::from_points(random_points(rng, 30));
  const GroupMatrix b = GroupMatrix::from_points(random_points(rng, 40));
  EXPECT_EQ(merge(a, GroupMatrix{}).matrix(), a.matrix());
  EXPECT_EQ(merge(a, b).matrix(), merge(b, a).matrix());
  EXPECT_EQ(merge(a, b).count(), 70);
}

TEST(Merge, HalvesEqualWholeSet) {
  std::mt19937_64 rng(3);
  const auto pts = random_points(rng, 200);
  const std::span<const Eigen::Vector3d> all(pts);
  const GroupMatrix whole = GroupMatrix::from_points(all);
  const GroupMatrix halves = merge(GroupMatrix::from_points(all.first(77)), GroupMatrix::from_points(all.subspan(77)));
  EXPECT_LT((whole.matrix() - halves.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(whole.count(), halves.count());
}

TEST(GroupCost, PointsOnPlaneGiveZero) {
  const Plane plane{Eigen::Vector3d(0, 0.6, 0.8), -1.0};
  std::vector<Eigen::Vector3d> pts;
  std::mt19937_64 rng(4);
  const Eigen::Vector3d u = Eigen::Vector3d::UnitX(), v = plane.n.cross(u);
  for (int k = 0; k < 50; ++k) pts.push_back(-plane.d * plane.n + uniform(rng, -2, 2) * u + uniform(rng, -2, 2) * v);
  const GroupMatrix g = GroupMatrix::from_points(pts);
  EXPECT_LT(group_cost(plane, Pose::identity(), g), 1e-12);
  EXPECT_LT(fixed_group_cost(plane, g), 1e-12);
}

TEST(GroupCost, SinglePointIsSquaredDistance) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Pose pose = random_pose(rng);
    const Plane plane = random_plane(rng);
    const Eigen::Vector3d p = random_points(rng, 1)[0];
    const GroupMatrix g = GroupMatrix::from_points(std::vector{p});
    const double e = point_to_plane(plane, pose, HomoPoint(p));
    EXPECT_NEAR(group_cost(plane, pose, g), e * e, 1e-12 * std::max(1.0, e * e));
    const double ef = fixed_point_to_plane(plane, HomoPoint(p));
    EXPECT_NEAR(fixed_group_cost(plane, g), ef * ef, 1e-12 * std::max(1.0, ef * ef));
  }
}

TEST(GroupCost, EqualsPerPointSum) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const int n = 1 + static_cast<int>(uniform(rng, 0, 500));
    const auto pts = random_points(rng, n);
    const Pose pose = random_pose(rng);
    const Plane plane = random_plane(rng);
    double brute = 0.0, brute_fixed = 0.0;
    for (const auto& p : pts) {
      const double e = point_to_plane(plane, pose, HomoPoint(p));
      const double ef = fixed_point_to_plane(plane, HomoPoint(p));
      brute += e * e;
      brute_fixed += ef * ef;
    }
    const GroupMatrix g = GroupMatrix::from_points(pts);
    EXPECT_LT(std::abs(group_cost(plane, pose, g) - brute) / brute, 1e-9);
    EXPECT_LT(std::abs(fixed_group_cost(plane, g) - brute_fixed) / brute_fixed, 1e-9);
  }
}

TEST(GroupCost, EmptyGroupThrows) {
  EXPECT_THROW(group_cost(Plane{}, Pose::identity(), GroupMatrix{}), EmptyGroupError);
  EXPECT_THROW(fixed_group_cost(Plane{}, GroupMatrix{}), EmptyGroupError);
  EXPECT_THROW(msgm(Plane{}, Pose::identity(), GroupMatrix{}), EmptyGroupError);
  EXPECT_THROW(fixed_msgm(Plane{}, GroupMatrix{}), EmptyGroupError);
}

TEST(GroupCost, TransformedPlaneIdentity) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Pose pose = random_pose(rng);
    const Plane plane = random_plane(rng);
    const GroupMatrix g = GroupMatrix::from_points(random_points(rng, 20));
    const Eigen::Vector4d pt = transform_plane(pose, plane);
    const double direct = pt.dot(g.matrix() * pt);
    EXPECT_NEAR(group_cost(plane, pose, g), direct, 1e-12 * std::max(1.0, direct));
  }
}

TEST(Msgm, DuplicationInvariance) {
  std::mt19937_64 rng(8);
  const auto pts = random_points(rng, 40);
  const Pose pose = random_pose(rng);
  const Plane plane = random_plane(rng);
  const GroupMatrix g = GroupMatrix::from_points(pts);
  const GroupMatrix doubled = merge(g, g);
  EXPECT_NEAR(msgm(plane, pose, doubled), msgm(plane, pose, g), 1e-12 * msgm(plane, pose, g));
  EXPECT_NEAR(fixed_msgm(plane, doubled), fixed_msgm(plane, g), 1e-12 * fixed_msgm(plane, g));
}

TEST(Msgm, ConstantDistanceGivesSquare) {
  const Plane plane{Eigen::Vector3d::UnitZ(), 0.0};
  std::vector<Eigen::Vector3d> pts;
  for (int k = 0; k < 20; ++k) pts.emplace_back(0.1 * k, -0.05 * k, (k % 2 == 0) ? 0.1 : -0.1);
  const GroupMatrix g = GroupMatrix::from_points(pts);
  EXPECT_NEAR(msgm(plane, Pose::identity(), g), 0.01, 1e-15);
  EXPECT_NEAR(fixed_msgm(plane, g), 0.01, 1e-15);
}

TEST(Msgm, EqualsMeanSquaredDistance) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto pts = random_points(rng, 1 + static_cast<int>(uniform(rng, 0, 100)));
    const Pose pose = random_pose(rng);
    const Plane plane = random_plane(rng);
    double mean = 0.0;
    for (const auto& p : pts) mean += std::pow(point_to_plane(plane, pose, HomoPoint(p)), 2);
    mean /= static_cast<double>(pts.size());
    EXPECT_NEAR(msgm(plane, pose, GroupMatrix::from_points(pts)), mean, 1e-9 * mean);
  }
}

TEST(Marginalize, IdentityLeavesGroupUnchanged) {
  std::mt19937_64 rng(10);
  const GroupMatrix g = GroupMatrix::from_points(random_points(rng, 25));
  const GroupMatrix m = marginalize_into_fixed(g, Pose::identity());
  EXPECT_LT((m.matrix() - g.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(m.count(), g.count());
}

TEST(Marginalize, SinglePointEqualsTransformedPoint) {
  std::mt19937_64 rng(11);
  const Pose pose = random_pose(rng);
  const Eigen::Vector3d p(0.3, -1.2, 2.0);
  const GroupMatrix m = marginalize_into_fixed(GroupMatrix::from_points(std::vector{p}), pose);
  const Eigen::Vector3d moved = (pose.matrix() * p.homogeneous()).head<3>();
  const GroupMatrix oracle = accumulate(GroupMatrix{}, HomoPoint(moved));
  EXPECT_LT((m.matrix() - oracle.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Marginalize, EqualsTransformThenAccumulateAndPreservesCost) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const auto pts = random_points(rng, 50);
    const Pose pose = random_pose(rng);
    std::vector<Eigen::Vector3d> moved;
    for (const auto& p : pts) moved.push_back((pose.matrix() * p.homogeneous()).head<3>());
    const GroupMatrix g = GroupMatrix::from_points(pts);
    const GroupMatrix m = marginalize_into_fixed(g, pose);
    const GroupMatrix oracle = GroupMatrix::from_points(moved);
    EXPECT_LT((m.matrix() - oracle.matrix()).cwiseAbs().maxCoeff() / oracle.matrix().cwiseAbs().maxCoeff(), 1e-9);
    const Plane plane = random_plane(rng);
    const double before = group_cost(plane, pose, g);
    EXPECT_NEAR(fixed_group_cost(plane, m), before, 1e-9 * before);
  }
}

TEST(GroupMatrixText, RoundTripIsExact) {
  std::mt19937_64 rng(13);
  const GroupMatrix g = GroupMatrix::from_points(random_points(rng, 33));
  std::stringstream ss;
  ss << g;
  GroupMatrix back;
  ss >> back;
  EXPECT_EQ(back.matrix(), g.matrix());
  EXPECT_EQ(back.count(), g.count());
}

TEST(GroupMatrixText, InconsistentInputRejected) {
  std::stringstream ss("1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 2 5");
  GroupMatrix g;
  EXPECT_THROW(ss >> g, InvalidInputError);
}

TEST(GroupMatrixInvariants, CentroidAndConsistency) {
  std::mt19937_64 rng(14);
  const auto pts = random_points(rng, 10);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= 10.0;
  const GroupMatrix g = GroupMatrix::from_points(pts);
  EXPECT_LT((g.centroid() - mean).norm(), 1e-12);
  EXPECT_TRUE(GroupMatrix{}.is_consistent());
  EXPECT_TRUE(GroupMatrix{}.empty());
  EXPECT_EQ(g.matrix(), g.matrix().transpose());
}

}  // namespace
}  // namespace rsoba
