/**
 * \file synthetic.hpp
 * \brief Ground-truth plane scenes with known trajectories, plus the brute
 *        force oracles (per-point cost, finite differences) used to check the
 *        group-matrix machinery.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rsoba/errors.hpp"
#include "rsoba/geometry.hpp"
#include "rsoba/group_metrics.hpp"
#include "rsoba/window.hpp"

namespace rsoba::synthetic {

struct SceneSpec {
  int frames = 10;
  int planes = 50;
  int points_per_plane = 20;  // per frame
  double sigma = 0.0;         // normal-direction noise (m)
  double extent = 4.0;        // patch centers and outliers in [-extent, extent]^3
  double patch_size = 2.0;    // side of each square plane patch (m)
  double min_offset = 0.2;    // smallest |d| of a sampled plane
  double min_separation = 0.0;  // smallest gap between two patches (m); 0 allows crossings
  double outlier_fraction = 0.0;
  double dt = 0.5;            // seconds between frames
  std::uint64_t seed = 1;
};

/// Points one frame sampled on one plane, in the frame's local coordinates.
struct PlaneSamples {
  std::vector<Eigen::Vector3d> points;
  std::vector<bool> outlier;
};

struct Scene {
  SceneSpec spec;
  std::vector<Pose> poses;
  std::vector<double> stamps;
  std::vector<Plane> planes;
  /// samples[frame][plane]
  std::vector<std::vector<PlaneSamples>> samples;

  std::vector<Eigen::Vector3d> frame_points(std::size_t frame) const {
    std::vector<Eigen::Vector3d> out;
    for (const auto& s : samples[frame]) out.insert(out.end(), s.points.begin(), s.points.end());
    return out;
  }
};

/// Independent generator per (stream, a, b) so output does not depend on
/// generation order.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                                  std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  // explicit mapping keeps output identical across standard libraries
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Standard normal via Box-Muller, truncated to |z| <= 4 by resampling.
inline double truncated_normal(std::mt19937_64& rng) {
  for (;;) {
    const double u1 = uniform(rng, 0.0, 1.0);
    const double u2 = uniform(rng, 0.0, 1.0);
    if (u1 <= 0.0) continue;
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    if (std::abs(z) <= 4.0) return z;
  }
}

inline Eigen::Vector3d unit_vector(std::mt19937_64& rng) {
  for (;;) {
    const Eigen::Vector3d v(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

enum Stream : std::uint64_t { kPlaneStream = 1, kPointStream = 2, kPerturbStream = 3 };

}  // namespace detail

/// Smooth trajectory: slow forward drift with gentle lateral/vertical sway
/// and small attitude changes.
inline Pose trajectory_pose(int i) {
  const double s = static_cast<double>(i);
  Pose p;
  p.t = Eigen::Vector3d(0.25 * s, 0.3 * std::sin(0.4 * s), 0.1 * std::sin(0.25 * s));
  p.phi = Eigen::Vector3d(0.05 * std::sin(0.5 * s), 0.04 * std::sin(0.3 * s + 0.5), 0.08 * s);
  return p;
}

inline Scene generate(const SceneSpec& spec) {
  if (spec.frames <= 0 || spec.planes <= 0 || spec.points_per_plane <= 0)
    throw InvalidInputError("scene needs at least one frame, plane and point");
  if (!(spec.sigma >= 0.0) || !(spec.extent > 0.0) || !(spec.patch_size > 0.0) ||
      !(spec.outlier_fraction >= 0.0 && spec.outlier_fraction <= 1.0) || !(spec.dt > 0.0) ||
      !(spec.min_offset >= kMinPlaneOffset) || spec.min_offset >= spec.extent || !(spec.min_separation >= 0.0))
    throw InvalidInputError("infeasible scene specification");

  Scene scene;
  scene.spec = spec;
  for (int i = 0; i < spec.frames; ++i) {
    scene.poses.push_back(trajectory_pose(i));
    scene.stamps.push_back(spec.dt * i);
  }

  const double half = 0.5 * spec.patch_size;
  struct Patch {
    Eigen::Vector3d center, u, v, n;

    double distance(const Eigen::Vector3d& p, double half_side) const {
      const Eigen::Vector3d r = p - center;
      const double a = std::clamp(r.dot(u), -half_side, half_side);
      const double b = std::clamp(r.dot(v), -half_side, half_side);
      return (r - a * u - b * v).norm();
    }
  };
  // gap between two patches, sampled on a grid over each
  auto gap = [half](const Patch& x, const Patch& y) {
    constexpr int kGrid = 20;
    double g = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= kGrid; ++a)
      for (int b = 0; b <= kGrid; ++b) {
        const double sa = half * (2.0 * a / kGrid - 1.0);
        const double sb = half * (2.0 * b / kGrid - 1.0);
        g = std::min(g, y.distance(x.center + sa * x.u + sb * x.v, half));
        g = std::min(g, x.distance(y.center + sa * y.u + sb * y.v, half));
      }
    return g;
  };
  constexpr int kMaxPlacementAttempts = 10000;

  std::vector<Patch> patches;
  for (int j = 0; j < spec.planes; ++j) {
    auto rng = stream_rng(spec.seed, detail::kPlaneStream, j);
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxPlacementAttempts)
        throw InvalidInputError("cannot place " + std::to_string(spec.planes) + " separated plane patches");
      Eigen::Vector3d n = detail::unit_vector(rng);
      const Eigen::Vector3d c(detail::uniform(rng, -spec.extent, spec.extent),
                              detail::uniform(rng, -spec.extent, spec.extent),
                              detail::uniform(rng, -spec.extent, spec.extent));
      double d = -n.dot(c);
      if (std::abs(d) < spec.min_offset) continue;
      if (d < 0) {
        n = -n;
        d = -d;
      }
      const Eigen::Vector3d helper = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
      const Eigen::Vector3d u = n.cross(helper).normalized();
      const Patch patch{c, u, n.cross(u), n};
      bool clear = true;
      if (spec.min_separation > 0.0)
        for (const auto& other : patches) clear = clear && gap(patch, other) >= spec.min_separation;
      if (!clear) continue;
      scene.planes.push_back({n, d});
      patches.push_back(patch);
      break;
    }
  }

  scene.samples.resize(spec.frames);
  for (int i = 0; i < spec.frames; ++i) {
    const Eigen::Matrix4d to_local = invert(scene.poses[i]).matrix();
    scene.samples[i].resize(spec.planes);
    for (int j = 0; j < spec.planes; ++j) {
      auto rng = stream_rng(spec.seed, detail::kPointStream, i, j);
      const Patch& patch = patches[j];
      const Plane& plane = scene.planes[j];
      PlaneSamples& out = scene.samples[i][j];
      for (int k = 0; k < spec.points_per_plane; ++k) {
        const double a = detail::uniform(rng, -half, half);
        const double b = detail::uniform(rng, -half, half);
        const double z = detail::truncated_normal(rng);
        const bool outlier = detail::uniform(rng, 0.0, 1.0) < spec.outlier_fraction;
        Eigen::Vector3d world = patch.center + a * patch.u + b * patch.v + spec.sigma * z * plane.n;
        if (outlier) {
          world = Eigen::Vector3d(detail::uniform(rng, -spec.extent, spec.extent),
                                  detail::uniform(rng, -spec.extent, spec.extent),
                                  detail::uniform(rng, -spec.extent, spec.extent));
        }
        out.points.push_back((to_local * world.homogeneous()).head<3>());
        out.outlier.push_back(outlier);
      }
    }
  }
  return scene;
}

/// Offsets each pose by `translation` meters and `rotation` radians (Euler
/// chart) along random directions. Frames listed in `keep` are untouched.
inline std::vector<Pose> perturb_poses(std::span<const Pose> poses, double translation, double rotation,
                                       std::uint64_t seed, std::span<const std::size_t> keep = {}) {
  std::vector<Pose> out(poses.begin(), poses.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    bool skip = false;
    for (auto k : keep) skip = skip || k == i;
    if (skip) continue;
    auto rng = stream_rng(seed, detail::kPerturbStream, i);
    out[i].t += translation * detail::unit_vector(rng);
    out[i].phi += rotation * detail::unit_vector(rng);
    out[i].validate();
  }
  return out;
}

/**
 * Window from the scene's known associations: frame ids 0..F-1, landmark id =
 * plane index, one observation per (frame, plane) with samples.
 */
inline Window make_window(const Scene& scene, std::span<const Pose> poses,
                          std::span<const Plane> planes) {
  if (poses.size() != scene.poses.size() || planes.size() != scene.planes.size())
    throw InvalidInputError("pose or plane count does not match scene");
  Window w;
  for (std::size_t i = 0; i < poses.size(); ++i) w.frames.push_back({i, scene.stamps[i], poses[i]});
  for (std::size_t j = 0; j < planes.size(); ++j) w.landmarks.emplace(j, plane_to_cp(planes[j]));
  for (std::size_t i = 0; i < poses.size(); ++i)
    for (std::size_t j = 0; j < planes.size(); ++j) {
      const auto& pts = scene.samples[i][j].points;
      if (pts.empty()) continue;
      w.observations.push_back({i, j, GroupMatrix::from_points(pts)});
    }
  return w;
}

inline Window make_window(const Scene& scene) { return make_window(scene, scene.poses, scene.planes); }

/// Point lists behind one integrated metric.
struct PointObservation {
  std::size_t frame = 0;
  std::size_t landmark = 0;
  std::vector<Eigen::Vector3d> points;  // local frame
};

/// Standard point-by-point BA cost: squared distances of every observed
/// point plus every fixed map point, no group matrices involved.
inline double standard_ba_cost(std::span<const Pose> poses, std::span<const Plane> planes,
                               std::span<const PointObservation> observations,
                               std::span<const std::vector<Eigen::Vector3d>> fixed_points = {}) {
  double cost = 0.0;
  for (const auto& obs : observations)
    for (const auto& p : obs.points) {
      const double e = point_to_plane(planes[obs.landmark], poses[obs.frame], HomoPoint(p));
      cost += e * e;
    }
  for (std::size_t j = 0; j < fixed_points.size(); ++j)
    for (const auto& p : fixed_points[j]) {
      const double e = fixed_point_to_plane(planes[j], HomoPoint(p));
      cost += e * e;
    }
  return cost;
}

inline std::vector<PointObservation> point_observations(const Scene& scene) {
  std::vector<PointObservation> out;
  for (std::size_t i = 0; i < scene.samples.size(); ++i)
    for (std::size_t j = 0; j < scene.samples[i].size(); ++j)
      out.push_back({i, j, scene.samples[i][j].points});
  return out;
}

inline double standard_ba_cost(const Scene& scene, std::span<const Pose> poses,
                               std::span<const Plane> planes) {
  const auto obs = point_observations(scene);
  return standard_ba_cost(poses, planes, obs);
}

/// A random (pose, CP plane, local point group) triple for derivative checks:
/// 1..max_points points scattered around the plane with normal noise, then
/// expressed in the pose's local frame.
struct MetricInstance {
  Pose pose;
  CpPlane plane;
  std::vector<Eigen::Vector3d> points;
  GroupMatrix group;
};

inline MetricInstance random_metric_instance(std::mt19937_64& rng, int max_points = 50,
                                             double noise = 0.1) {
  MetricInstance m;
  m.pose.t = Eigen::Vector3d(detail::uniform(rng, -2, 2), detail::uniform(rng, -2, 2), detail::uniform(rng, -2, 2));
  m.pose.phi = Eigen::Vector3d(detail::uniform(rng, -1.0, 1.0), detail::uniform(rng, -1.0, 1.0),
                               detail::uniform(rng, -1.0, 1.0));
  const Eigen::Vector3d n = detail::unit_vector(rng);
  const double d = detail::uniform(rng, 0.5, 3.0);
  m.plane.pi = d * n;
  const Eigen::Vector3d helper = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d u = n.cross(helper).normalized();
  const Eigen::Vector3d v = n.cross(u);
  const int count = 1 + static_cast<int>(detail::uniform(rng, 0.0, 1.0) * max_points) % max_points;
  const Eigen::Matrix4d to_local = invert(m.pose).matrix();
  for (int k = 0; k < count; ++k) {
    const Eigen::Vector3d world = -d * n + detail::uniform(rng, -2, 2) * u + detail::uniform(rng, -2, 2) * v +
                                  noise * detail::truncated_normal(rng) * n;
    m.points.push_back((to_local * world.homogeneous()).head<3>());
  }
  m.group = GroupMatrix::from_points(m.points);
  return m;
}

// ---------------------------------------------------------------------------
// Central finite differences

inline constexpr double kFirstOrderStep = 1e-6;
inline constexpr double kSecondOrderStep = 1e-5;

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline double checked(double v) {
  if (!std::isfinite(v)) throw DomainError("non-finite evaluation in finite differences");
  return v;
}

inline Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x,
                                   double step = kFirstOrderStep) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp(k) = x(k) + step;
    xm(k) = x(k) - step;
    g(k) = (checked(f(xp)) - checked(f(xm))) / (2.0 * step);
    xp(k) = xm(k) = x(k);
  }
  return g;
}

/// Columns are central differences of f along each coordinate.
inline Eigen::MatrixXd fd_jacobian(const VectorFn& f, const Eigen::VectorXd& x,
                                   double step = kSecondOrderStep) {
  Eigen::MatrixXd j;
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    xp(k) = x(k) + step;
    xm(k) = x(k) - step;
    const Eigen::VectorXd fp = f(xp), fm = f(xm);
    if (!fp.allFinite() || !fm.allFinite()) throw DomainError("non-finite evaluation in finite differences");
    if (j.size() == 0) j.resize(fp.size(), x.size());
    j.col(k) = (fp - fm) / (2.0 * step);
    xp(k) = xm(k) = x(k);
  }
  return j;
}

/// Hessian from second central differences of a scalar function.
inline Eigen::MatrixXd fd_hessian(const ScalarFn& f, const Eigen::VectorXd& x,
                                  double step = kSecondOrderStep) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  const double f0 = checked(f(x));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index l = k; l < n; ++l) {
      Eigen::VectorXd x1 = x;
      if (k == l) {
        x1(k) += step;
        const double fp = checked(f(x1));
        x1(k) = x(k) - step;
        const double fm = checked(f(x1));
        h(k, k) = (fp - 2.0 * f0 + fm) / (step * step);
        continue;
      }
      auto eval = [&](double sk, double sl) {
        Eigen::VectorXd y = x;
        y(k) += sk * step;
        y(l) += sl * step;
        return checked(f(y));
      };
      h(k, l) = h(l, k) = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * step * step);
    }
  }
  return h;
}

/// Pose and CP plane packed as the 9-vector [t, φ, Π].
inline Eigen::VectorXd pack_state(const Pose& pose, const CpPlane& cp) {
  Eigen::VectorXd x(9);
  x << pose.t, pose.phi, cp.pi;
  return x;
}

inline Pose unpack_pose(const Eigen::VectorXd& x) { return {x.segment<3>(0), x.segment<3>(3)}; }
inline CpPlane unpack_plane(const Eigen::VectorXd& x) { return {x.segment<3>(6)}; }

}  // namespace rsoba::synthetic
