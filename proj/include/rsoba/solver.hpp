/**
 * \file solver.hpp
 * \brief Robust window objective, block normal-equation assembly, Schur
 *        complement solve and the Levenberg-Marquardt loop.
 *
 * Each integrated metric couples one pose with one landmark and each fixed
 * metric touches one landmark, so the Hessian has diagonal pose blocks,
 * diagonal landmark blocks and one pose/landmark cross block per observation.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rsoba/derivatives.hpp"
#include "rsoba/errors.hpp"
#include "rsoba/robust_kernel.hpp"
#include "rsoba/window.hpp"

namespace rsoba {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix63d = Eigen::Matrix<double, 6, 3>;

/// Window objective: robustified integrated plus fixed mean square group metrics.
inline double total_cost(const Window& w, const HuberKernel& kernel) {
  if (w.frames.empty()) throw InvalidInputError("empty window");
  const auto lookup = w.frame_lookup();
  std::map<LandmarkId, Plane> planes;
  for (const auto& [id, cp] : w.landmarks) planes.emplace(id, cp_to_plane(cp));

  double cost = 0.0;
  for (const auto& obs : w.observations) {
    const Pose& pose = w.frames.at(lookup.at(obs.frame)).pose;
    cost += kernel.rho(msgm(planes.at(obs.landmark), pose, obs.group));
  }
  for (const auto& [id, g] : w.fixed)
    if (!g.empty()) cost += kernel.rho(fixed_msgm(planes.at(id), g));
  return cost;
}

struct NormalSystem {
  struct CrossBlock {
    std::size_t pose = 0;
    std::size_t landmark = 0;
    Matrix63d block = Matrix63d::Zero();
  };

  /// Window position of each free pose; the gauge frame is absent.
  std::vector<std::size_t> pose_frames;
  std::vector<LandmarkId> landmark_ids;
  std::vector<Matrix6d> pose_blocks;
  std::vector<Vector6d> pose_gradient;
  std::vector<Eigen::Matrix3d> landmark_blocks;
  std::vector<Eigen::Vector3d> landmark_gradient;
  std::vector<CrossBlock> cross;
  double lambda = 0.0;

  std::size_t num_poses() const { return pose_blocks.size(); }
  std::size_t num_landmarks() const { return landmark_blocks.size(); }
  std::size_t dim() const { return 6 * num_poses() + 3 * num_landmarks(); }

  /// Marquardt damping λ·|diag(H)|, floored so zero-curvature directions
  /// still receive some damping. The absolute value only matters for the
  /// full Hessian, whose second-order term can make a diagonal entry negative.
  template <int N>
  Eigen::Matrix<double, N, N> damped(const Eigen::Matrix<double, N, N>& block) const {
    Eigen::Matrix<double, N, N> out = block;
    for (int i = 0; i < N; ++i)
      out(i, i) += lambda * std::clamp(std::abs(block(i, i)), kMinDiagonal, kMaxDiagonal);
    return out;
  }

  /// Full (optionally damped) system [poses | landmarks] as dense matrices.
  void to_dense(bool with_damping, Eigen::MatrixXd& h, Eigen::VectorXd& g) const {
    const std::size_t np = num_poses();
    h = Eigen::MatrixXd::Zero(dim(), dim());
    g = Eigen::VectorXd::Zero(dim());
    for (std::size_t i = 0; i < np; ++i) {
      h.block<6, 6>(6 * i, 6 * i) = with_damping ? damped(pose_blocks[i]) : pose_blocks[i];
      g.segment<6>(6 * i) = pose_gradient[i];
    }
    for (std::size_t j = 0; j < num_landmarks(); ++j) {
      const std::size_t o = 6 * np + 3 * j;
      h.block<3, 3>(o, o) = with_damping ? damped(landmark_blocks[j]) : landmark_blocks[j];
      g.segment<3>(o) = landmark_gradient[j];
    }
    for (const auto& c : cross) {
      const std::size_t o = 6 * np + 3 * c.landmark;
      h.block<6, 3>(6 * c.pose, o) += c.block;
      h.block<3, 6>(o, 6 * c.pose) += c.block.transpose();
    }
  }

  static constexpr double kMinDiagonal = 1e-6;
  static constexpr double kMaxDiagonal = 1e32;
};

struct AssembleOptions {
  std::size_t fixed_frame = 0;
  HessianMode hessian = HessianMode::kFull;
  bool clamp_second_order = false;
};

/// Scatter every robustified metric linearization into the block layout.
inline NormalSystem assemble(const Window& w, const HuberKernel& kernel,
                             const AssembleOptions& opts = {}) {
  if (w.frames.empty()) throw InvalidInputError("empty window");
  if (opts.fixed_frame >= w.frames.size()) throw InvalidInputError("gauge frame outside window");

  NormalSystem sys;
  std::vector<std::ptrdiff_t> reduced(w.frames.size(), -1);
  for (std::size_t i = 0; i < w.frames.size(); ++i) {
    if (i == opts.fixed_frame) continue;
    reduced[i] = static_cast<std::ptrdiff_t>(sys.pose_frames.size());
    sys.pose_frames.push_back(i);
  }
  sys.pose_blocks.assign(sys.pose_frames.size(), Matrix6d::Zero());
  sys.pose_gradient.assign(sys.pose_frames.size(), Vector6d::Zero());

  std::map<LandmarkId, std::size_t> lm_index;
  for (const auto& [id, cp] : w.landmarks) {
    lm_index.emplace(id, sys.landmark_ids.size());
    sys.landmark_ids.push_back(id);
  }
  sys.landmark_blocks.assign(sys.landmark_ids.size(), Eigen::Matrix3d::Zero());
  sys.landmark_gradient.assign(sys.landmark_ids.size(), Eigen::Vector3d::Zero());
  std::vector<bool> constrained(sys.landmark_ids.size(), false);

  const auto lookup = w.frame_lookup();
  for (const auto& obs : w.observations) {
    const std::size_t fi = lookup.at(obs.frame);
    const std::size_t lj = lm_index.at(obs.landmark);
    const auto lin = integrated_linearization(w.frames[fi].pose, w.landmarks.at(obs.landmark),
                                              obs.group, opts.hessian);
    const auto r = robustify(lin, kernel, opts.clamp_second_order);
    constrained[lj] = true;
    sys.landmark_blocks[lj] += r.hessian.bottomRightCorner<3, 3>();
    sys.landmark_gradient[lj] += r.gradient.tail<3>();
    if (reduced[fi] < 0) continue;
    const auto pi = static_cast<std::size_t>(reduced[fi]);
    sys.pose_blocks[pi] += r.hessian.topLeftCorner<6, 6>();
    sys.pose_gradient[pi] += r.gradient.head<6>();
    sys.cross.push_back({pi, lj, r.hessian.topRightCorner<6, 3>()});
  }
  for (const auto& [id, g] : w.fixed) {
    if (g.empty()) continue;
    const std::size_t lj = lm_index.at(id);
    const auto r = robustify(fixed_linearization(w.landmarks.at(id), g, opts.hessian), kernel,
                             opts.clamp_second_order);
    constrained[lj] = true;
    sys.landmark_blocks[lj] += r.hessian;
    sys.landmark_gradient[lj] += r.gradient;
  }
  for (std::size_t j = 0; j < constrained.size(); ++j)
    if (!constrained[j])
      throw InvalidInputError("landmark " + std::to_string(sys.landmark_ids[j]) +
                              " has no observation and no fixed points");
  return sys;
}

/// Increments in window order; the gauge frame receives zero.
struct StateDelta {
  std::vector<Vector6d> poses;
  std::vector<Eigen::Vector3d> landmarks;

  double max_abs() const {
    double m = 0.0;
    for (const auto& p : poses) m = std::max(m, p.cwiseAbs().maxCoeff());
    for (const auto& l : landmarks) m = std::max(m, l.cwiseAbs().maxCoeff());
    return m;
  }

  bool all_finite() const {
    for (const auto& p : poses)
      if (!p.allFinite()) return false;
    for (const auto& l : landmarks)
      if (!l.allFinite()) return false;
    return true;
  }
};

/**
 * Solve the damped system (H + λ diag H) Δx = -g by eliminating the landmark
 * blocks, solving the reduced pose system and back-substituting.
 *
 * Returns pose deltas indexed like NormalSystem::pose_frames.
 */
inline StateDelta schur_solve(const NormalSystem& sys) {
  const std::size_t np = sys.num_poses();
  const std::size_t nl = sys.num_landmarks();

  std::vector<Eigen::Matrix3d> c_inv(nl);
  for (std::size_t j = 0; j < nl; ++j) {
    Eigen::LLT<Eigen::Matrix3d> llt(sys.damped(sys.landmark_blocks[j]));
    if (llt.info() != Eigen::Success)
      throw SingularSystemError("damped landmark block " + std::to_string(sys.landmark_ids[j]) +
                                " is not positive definite");
    c_inv[j] = llt.solve(Eigen::Matrix3d::Identity());
  }

  std::vector<std::vector<const NormalSystem::CrossBlock*>> by_landmark(nl);
  for (const auto& c : sys.cross) by_landmark[c.landmark].push_back(&c);

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(6 * np, 6 * np);
  Eigen::VectorXd rhs(6 * np);
  for (std::size_t i = 0; i < np; ++i) {
    s.block<6, 6>(6 * i, 6 * i) = sys.damped(sys.pose_blocks[i]);
    rhs.segment<6>(6 * i) = -sys.pose_gradient[i];
  }
  for (std::size_t j = 0; j < nl; ++j) {
    for (const auto* a : by_landmark[j]) {
      const Matrix63d wc = a->block * c_inv[j];
      rhs.segment<6>(6 * a->pose) += wc * sys.landmark_gradient[j];
      for (const auto* b : by_landmark[j])
        s.block<6, 6>(6 * a->pose, 6 * b->pose) -= wc * b->block.transpose();
    }
  }

  StateDelta out;
  out.poses.assign(np, Vector6d::Zero());
  if (np > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (s + s.transpose()));
    if (llt.info() != Eigen::Success) throw SingularSystemError("reduced pose system is not positive definite");
    const Eigen::VectorXd dp = llt.solve(rhs);
    for (std::size_t i = 0; i < np; ++i) out.poses[i] = dp.segment<6>(6 * i);
  }
  out.landmarks.resize(nl);
  for (std::size_t j = 0; j < nl; ++j) {
    Eigen::Vector3d r = -sys.landmark_gradient[j];
    for (const auto* a : by_landmark[j]) r -= a->block.transpose() * out.poses[a->pose];
    out.landmarks[j] = c_inv[j] * r;
  }
  return out;
}

/// Additive update in the (t, φ, Π) chart. Throws DomainError when the step
/// leaves the chart (gimbal lock or a plane collapsing onto the origin).
inline Window update_state(const Window& w, const StateDelta& delta) {
  if (delta.poses.size() != w.frames.size() || delta.landmarks.size() != w.landmarks.size())
    throw InvalidInputError("state delta does not match window");
  if (!delta.all_finite()) throw DomainError("non-finite state delta");
  Window out = w;
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    Pose& p = out.frames[i].pose;
    p.t += delta.poses[i].head<3>();
    p.phi += delta.poses[i].tail<3>();
    p.phi.x() = wrap_angle(p.phi.x());
    p.phi.z() = wrap_angle(p.phi.z());
    p.validate();
  }
  std::size_t j = 0;
  for (auto& [id, cp] : out.landmarks) {
    cp.pi += delta.landmarks[j++];
    cp = plane_to_cp(cp_to_plane(cp));
  }
  return out;
}

/// Expands a reduced solution (gauge frame missing) into window order.
inline StateDelta expand_delta(const NormalSystem& sys, const StateDelta& reduced,
                               std::size_t num_frames) {
  StateDelta out;
  out.poses.assign(num_frames, Vector6d::Zero());
  for (std::size_t i = 0; i < sys.pose_frames.size(); ++i) out.poses[sys.pose_frames[i]] = reduced.poses[i];
  out.landmarks = reduced.landmarks;
  return out;
}

struct LmConfig {
  double lambda_init = 0.01;
  int max_iter = 20;
  double cost_tol = 1e-8;
  double step_tol = 1e-10;
  bool freeze_lambda = false;
  ClampPolicy clamp = ClampPolicy::kAuto;
  HessianMode hessian = HessianMode::kFull;
  std::size_t fixed_frame = 0;
  double lambda_up = 4.0;
  double lambda_down = 0.5;
};

struct SolveReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Current cost after each iteration; entry 0 is the initial cost.
  std::vector<double> cost_trace;
  /// λ used by each iteration.
  std::vector<double> lambda_trace;
  std::vector<bool> accepted;
  bool converged = false;
  std::string termination;

  /// First iteration count at which the cost dropped below the threshold, or -1.
  int iterations_to(double threshold) const {
    for (std::size_t k = 0; k < cost_trace.size(); ++k)
      if (cost_trace[k] < threshold) return static_cast<int>(k);
    return -1;
  }
};

/// Non-finite cost during the solve. Carries the report up to that point.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, SolveReport report)
      : Error(what), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

struct SolveResult {
  Window window;
  SolveReport report;
};

/**
 * Levenberg-Marquardt over the window: assemble, damp, Schur solve, take the
 * step if it lowers the cost (λ ← λ·lambda_down) or revert it (λ ← λ·lambda_up).
 */
inline SolveResult lm_iterate(const Window& start, const HuberKernel& kernel, const LmConfig& cfg) {
  start.validate();
  SolveResult res{start, {}};
  SolveReport& rep = res.report;
  double cost = total_cost(res.window, kernel);
  if (!std::isfinite(cost)) throw DivergenceError("initial cost is not finite", rep);
  rep.initial_cost = cost;
  rep.cost_trace.push_back(cost);
  double lambda = cfg.lambda_init;

  AssembleOptions opts{cfg.fixed_frame, cfg.hessian, cfg.clamp == ClampPolicy::kAlways};
  rep.termination = "max_iter";
  while (rep.iterations < cfg.max_iter) {
    if (cost == 0.0) {
      rep.converged = true;
      rep.termination = "zero_cost";
      break;
    }
    ++rep.iterations;
    rep.lambda_trace.push_back(lambda);

    StateDelta delta;
    NormalSystem sys;
    bool solved = false;
    AssembleOptions attempt = opts;
    for (;;) {
      sys = assemble(res.window, kernel, attempt);
      sys.lambda = lambda;
      try {
        delta = expand_delta(sys, schur_solve(sys), res.window.frames.size());
        solved = true;
      } catch (const SingularSystemError&) {
        if (!attempt.clamp_second_order) {
          attempt.clamp_second_order = true;
          continue;
        }
      }
      break;
    }

    bool accept = false;
    Window candidate;
    if (solved) {
      if (delta.max_abs() < cfg.step_tol) {
        rep.accepted.push_back(false);
        rep.cost_trace.push_back(cost);
        rep.converged = true;
        rep.termination = "step_tol";
        break;
      }
      try {
        candidate = update_state(res.window, delta);
        const double new_cost = total_cost(candidate, kernel);
        if (!std::isfinite(new_cost)) {
          rep.final_cost = cost;
          throw DivergenceError("cost became non-finite", rep);
        }
        if (new_cost < cost) {
          accept = true;
          const double rel = (cost - new_cost) / cost;
          cost = new_cost;
          res.window = std::move(candidate);
          rep.accepted.push_back(true);
          rep.cost_trace.push_back(cost);
          if (!cfg.freeze_lambda) lambda *= cfg.lambda_down;
          if (rel < cfg.cost_tol) {
            rep.converged = true;
            rep.termination = "cost_tol";
            break;
          }
          continue;
        }
      } catch (const DomainError&) {
        // step left the chart: treated like a cost increase
      }
    }
    if (!accept) {
      rep.accepted.push_back(false);
      rep.cost_trace.push_back(cost);
      // with a frozen λ the same step would be proposed again
      if (cfg.freeze_lambda) {
        rep.termination = "rejected_frozen";
        break;
      }
      lambda *= cfg.lambda_up;
    }
  }
  rep.final_cost = cost;
  return res;
}

}  // namespace rsoba
