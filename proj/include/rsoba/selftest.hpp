/**
 * \file selftest.hpp
 * \brief Quick oracle checks runnable from the command line: clustering
 *        identity, finite-difference derivatives, Schur versus dense solve
 *        and marginalization cost preservation.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rsoba/derivatives.hpp"
#include "rsoba/group_metrics.hpp"
#include "rsoba/solver.hpp"
#include "rsoba/synthetic.hpp"
#include "rsoba/voxel_map.hpp"

namespace rsoba::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double tolerance = 0.0;
};

using IntegratedFn = std::function<IntegratedLinearization(const Pose&, const CpPlane&, const GroupMatrix&)>;

inline IntegratedFn default_integrated() {
  return [](const Pose& t, const CpPlane& cp, const GroupMatrix& g) { return integrated_linearization(t, cp, g); };
}

/// group_cost against the per-point sum, relative error.
inline CheckResult clustering_identity(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckResult r{"clustering identity", true, 0.0, 1e-9};
  for (int i = 0; i < instances; ++i) {
    const auto m = synthetic::random_metric_instance(rng, 500, 0.3);
    const Plane plane = cp_to_plane(m.plane);
    double brute = 0.0;
    for (const auto& p : m.points) {
      const double e = point_to_plane(plane, m.pose, HomoPoint(p));
      brute += e * e;
    }
    const double clustered = group_cost(plane, m.pose, m.group);
    const double rel = std::abs(clustered - brute) / std::max(brute, 1e-300);
    r.worst = std::max(r.worst, rel);
  }
  r.passed = r.worst < r.tolerance;
  return r;
}

struct DerivativeErrors {
  double gradient_rel = 0.0;
  double hessian_abs = 0.0;
};

/// Analytic integrated and fixed linearizations against central differences
/// of the metric (gradient) and of the analytic gradient (Hessian).
inline DerivativeErrors derivative_errors(int draws, std::uint64_t seed, const IntegratedFn& integrated) {
  using synthetic::pack_state;
  std::mt19937_64 rng(seed);
  DerivativeErrors out;
  for (int i = 0; i < draws; ++i) {
    const auto m = synthetic::random_metric_instance(rng, 50, 0.2);
    const Eigen::VectorXd x = pack_state(m.pose, m.plane);
    auto metric = [&](const Eigen::VectorXd& y) {
      return msgm(cp_to_plane(synthetic::unpack_plane(y)), synthetic::unpack_pose(y), m.group);
    };
    auto gradient = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
      return integrated(synthetic::unpack_pose(y), synthetic::unpack_plane(y), m.group).gradient;
    };
    const auto lin = integrated(m.pose, m.plane, m.group);
    const Eigen::VectorXd g_fd = synthetic::fd_gradient(metric, x);
    const Eigen::MatrixXd h_fd = synthetic::fd_jacobian(gradient, x);
    out.gradient_rel = std::max(out.gradient_rel, (lin.gradient - g_fd).cwiseAbs().maxCoeff() /
                                                      std::max(g_fd.cwiseAbs().maxCoeff(), 1e-12));
    out.hessian_abs = std::max(out.hessian_abs, (lin.hessian - h_fd).cwiseAbs().maxCoeff());

    // fixed metric: same points taken as map points
    const Eigen::VectorXd y = m.plane.pi;
    auto fixed_metric = [&](const Eigen::VectorXd& v) { return fixed_msgm(cp_to_plane({v}), m.group); };
    auto fixed_gradient = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return fixed_linearization({v}, m.group).gradient;
    };
    const auto flin = fixed_linearization(m.plane, m.group);
    const Eigen::VectorXd fg_fd = synthetic::fd_gradient(fixed_metric, y);
    const Eigen::MatrixXd fh_fd = synthetic::fd_jacobian(fixed_gradient, y);
    out.gradient_rel = std::max(out.gradient_rel, (flin.gradient - fg_fd).cwiseAbs().maxCoeff() /
                                                      std::max(fg_fd.cwiseAbs().maxCoeff(), 1e-12));
    out.hessian_abs = std::max(out.hessian_abs, (flin.hessian - fh_fd).cwiseAbs().maxCoeff());
  }
  return out;
}

/// Random window with 2..5 poses and 3..20 landmarks, every landmark seen by
/// every frame, at a slightly perturbed state so the system is non-trivial.
inline Window random_window(std::mt19937_64& rng, int min_poses = 2, int max_poses = 5, int min_landmarks = 3,
                            int max_landmarks = 20) {
  auto pick = [&](int lo, int hi) {
    return lo + static_cast<int>(synthetic::detail::uniform(rng, 0.0, 1.0) * (hi - lo + 1)) % (hi - lo + 1);
  };
  synthetic::SceneSpec spec;
  spec.frames = pick(min_poses, max_poses);
  spec.planes = pick(min_landmarks, max_landmarks);
  spec.points_per_plane = 15;
  spec.sigma = 0.01;
  spec.seed = rng();
  const auto scene = synthetic::generate(spec);
  const std::size_t keep[] = {0};
  const auto poses = synthetic::perturb_poses(scene.poses, 0.03, 0.01, spec.seed, keep);
  std::vector<Plane> planes = scene.planes;
  for (auto& p : planes) p.d += synthetic::detail::uniform(rng, -0.02, 0.02);
  return synthetic::make_window(scene, poses, planes);
}

/// Worst relative difference between the Schur solution and a dense
/// Cholesky solve of the same damped system.
inline double schur_dense_error(const NormalSystem& sys) {
  const StateDelta s = schur_solve(sys);
  Eigen::MatrixXd h;
  Eigen::VectorXd g;
  sys.to_dense(true, h, g);
  const Eigen::VectorXd dense = h.llt().solve(-g);
  Eigen::VectorXd schur(sys.dim());
  for (std::size_t i = 0; i < sys.num_poses(); ++i) schur.segment<6>(6 * i) = s.poses[i];
  for (std::size_t j = 0; j < sys.num_landmarks(); ++j) schur.segment<3>(6 * sys.num_poses() + 3 * j) = s.landmarks[j];
  return (schur - dense).norm() / std::max(dense.norm(), 1e-300);
}

/// Smallest λ in {λ0·4^k} whose damped system is positive definite, as the
/// LM loop would reach after rejected factorizations. The full Hessian can be
/// indefinite away from the optimum.
inline double positive_definite_lambda(const NormalSystem& sys, double lambda0) {
  NormalSystem probe = sys;
  Eigen::MatrixXd h;
  Eigen::VectorXd g;
  for (probe.lambda = lambda0; probe.lambda < 1e12; probe.lambda *= 4.0) {
    probe.to_dense(true, h, g);
    if (h.llt().info() == Eigen::Success) return probe.lambda;
  }
  throw SingularSystemError("no damping makes the system positive definite");
}

inline CheckResult schur_equivalence(int systems, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckResult r{"schur equivalence", true, 0.0, 1e-8};
  for (int i = 0; i < systems; ++i) {
    const Window w = random_window(rng);
    NormalSystem sys = assemble(w, HuberKernel::with_threshold(0.02));
    sys.lambda = positive_definite_lambda(sys, 0.01);
    r.worst = std::max(r.worst, schur_dense_error(sys));
  }
  r.passed = r.worst < r.tolerance;
  return r;
}

/// Relative change of the window objective when the oldest frame is
/// marginalized at fixed plane parameters.
inline double marginalization_change(const Window& w, const HuberKernel& kernel) {
  const double before = total_cost(w, kernel);
  Window after = w;
  const FrameId oldest = w.frames.front().id;
  const Pose& pose = w.frames.front().pose;
  after.observations.clear();
  for (const auto& obs : w.observations) {
    if (obs.frame != oldest) {
      after.observations.push_back(obs);
      continue;
    }
    after.fixed[obs.landmark] += marginalize_into_fixed(obs.group, pose);
  }
  after.frames.erase(after.frames.begin());
  const double now = total_cost(after, kernel);
  return std::abs(now - before) / std::max(before, 1e-300);
}

inline CheckResult marginalization_consistency(int windows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CheckResult r{"marginalization consistency", true, 0.0, 1e-9};
  for (int i = 0; i < windows; ++i) {
    // fixed matrices start empty, so each marginalized group keeps its own
    // robustified term
    const Window w = random_window(rng);
    r.worst = std::max(r.worst, marginalization_change(w, HuberKernel::with_threshold(0.02)));
  }
  r.passed = r.worst < r.tolerance;
  return r;
}

/// Runs every suite, printing one line each. With `inject_fault` the
/// derivative suite checks a linearization whose rotation gradient has the
/// wrong sign, which must be caught.
inline bool run_all(std::ostream& os, bool inject_fault = false) {
  IntegratedFn integrated = default_integrated();
  if (inject_fault) {
    integrated = [](const Pose& t, const CpPlane& cp, const GroupMatrix& g) {
      auto lin = integrated_linearization(t, cp, g);
      lin.gradient.segment<3>(3) *= -1.0;
      return lin;
    };
  }
  std::vector<CheckResult> results;
  results.push_back(clustering_identity(200, 11));
  const auto d = derivative_errors(200, 12, integrated);
  results.push_back({"gradient vs finite differences", d.gradient_rel < 1e-5, d.gradient_rel, 1e-5});
  results.push_back({"hessian vs finite differences", d.hessian_abs < 1e-4, d.hessian_abs, 1e-4});
  results.push_back(schur_equivalence(20, 13));
  results.push_back(marginalization_consistency(10, 14));

  bool ok = true;
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "[%s] %-32s worst=%.3e tol=%.1e\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  r.worst, r.tolerance);
    os << buf;
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace rsoba::selftest
