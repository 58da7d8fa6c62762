/**
 * \file derivatives.hpp
 * \brief Analytic gradient and Hessian of the integrated and fixed mean
 *        square group metrics.
 *
 * The integrated metric is parameterized by x = [t, φ, Π] (9 values), the
 * fixed metric by y = Π (3 values). Both are quadratic forms in a plane
 * vector, so everything reduces to the first and second derivatives of that
 * plane vector with respect to the chart.
 */
#pragma once

#include <array>

#include <Eigen/Core>

#include "rsoba/geometry.hpp"
#include "rsoba/group_metrics.hpp"

namespace rsoba {

inline constexpr int kIntegratedDim = 9;
inline constexpr int kFixedDim = 3;

/// Whether the Hessian keeps the plane second-derivative term.
enum class HessianMode { kFull, kGaussNewton };

template <int Dim>
struct MetricLinearization {
  using Vector = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  Vector gradient = Vector::Zero();
  Matrix hessian = Matrix::Zero();
  double cost = 0.0;
};

using IntegratedLinearization = MetricLinearization<kIntegratedDim>;
using FixedLinearization = MetricLinearization<kFixedDim>;

/// Columns are ∂π'/∂x_k for the 9-dim chart.
struct PlaneJacobian {
  Eigen::Matrix<double, 4, kIntegratedDim> J;
};

/// G[k][l] = ∂²π'/∂x_k∂x_l, symmetric in (k, l).
struct PlaneSecondDeriv {
  std::array<std::array<Eigen::Vector4d, kIntegratedDim>, kIntegratedDim> G;
};

using CpJacobian = Eigen::Matrix<double, 4, 3>;
using CpSecondDeriv = std::array<std::array<Eigen::Vector4d, 3>, 3>;

/// ∂π/∂Π = [ (I - nnᵀ)/d ; nᵀ ].
inline CpJacobian cp_jacobian(const CpPlane& cp) {
  const Plane plane = cp_to_plane(cp);
  const Eigen::Vector3d& n = plane.n;
  CpJacobian j;
  j.topRows<3>() = (Eigen::Matrix3d::Identity() - n * n.transpose()) / plane.d;
  j.row(3) = n.transpose();
  return j;
}

/**
 * ∂²π/∂Π_k∂Π_l. With n = Π/|Π| and d = |Π|:
 *   ∂²n_a = (3 n_a n_k n_l - δ_al n_k - δ_kl n_a - δ_ak n_l) / d²
 *   ∂²d   = (δ_kl - n_k n_l) / d
 */
inline CpSecondDeriv cp_second_deriv(const CpPlane& cp) {
  const Plane plane = cp_to_plane(cp);
  const Eigen::Vector3d& n = plane.n;
  const double d = plane.d;
  const double d2 = d * d;
  CpSecondDeriv g;
  for (int k = 0; k < 3; ++k) {
    for (int l = k; l < 3; ++l) {
      const double dkl = k == l ? 1.0 : 0.0;
      Eigen::Vector4d v;
      for (int a = 0; a < 3; ++a) {
        const double dal = a == l ? 1.0 : 0.0;
        const double dak = a == k ? 1.0 : 0.0;
        v(a) = (3.0 * n(a) * n(k) * n(l) - dal * n(k) - dkl * n(a) - dak * n(l)) / d2;
      }
      v(3) = (dkl - n(k) * n(l)) / d;
      g[k][l] = v;
      g[l][k] = v;
    }
  }
  return g;
}

namespace detail {

/// ∂R/∂φ_k for R = Rx Ry Rz.
inline std::array<Eigen::Matrix3d, 3> rotation_first(const Eigen::Vector3d& phi) {
  std::array<Eigen::Matrix3d, 3> out;
  for (int k = 0; k < 3; ++k) {
    out[k] = axis_rotation(0, phi.x(), k == 0) * axis_rotation(1, phi.y(), k == 1) *
             axis_rotation(2, phi.z(), k == 2);
  }
  return out;
}

/// ∂²R/∂φ_k∂φ_l; each factor is differentiated once per matching index.
inline Eigen::Matrix3d rotation_second(const Eigen::Vector3d& phi, int k, int l) {
  auto order = [&](int axis) { return (k == axis) + (l == axis); };
  return axis_rotation(0, phi.x(), order(0)) * axis_rotation(1, phi.y(), order(1)) *
         axis_rotation(2, phi.z(), order(2));
}

}  // namespace detail

inline PlaneJacobian plane_jacobian(const Pose& pose, const CpPlane& cp) {
  pose.validate();
  const Plane plane = cp_to_plane(cp);
  const Eigen::Vector3d& n = plane.n;
  const auto dr = detail::rotation_first(pose.phi);

  PlaneJacobian out;
  out.J.setZero();
  // translation: only the offset row depends on t
  out.J.block<1, 3>(3, 0) = n.transpose();
  // rotation: offset row independent of φ
  for (int k = 0; k < 3; ++k) out.J.block<3, 1>(0, 3 + k) = dr[k].transpose() * n;
  // plane: Tᵀ ∂π/∂Π
  const CpJacobian jc = cp_jacobian(cp);
  const Eigen::Matrix4d tt = pose.matrix().transpose();
  out.J.block<4, 3>(0, 6) = tt * jc;
  return out;
}

inline PlaneSecondDeriv plane_second_deriv(const Pose& pose, const CpPlane& cp) {
  pose.validate();
  const Plane plane = cp_to_plane(cp);
  const Eigen::Vector3d& n = plane.n;
  const CpJacobian jc = cp_jacobian(cp);
  const CpSecondDeriv gc = cp_second_deriv(cp);
  const auto dr = detail::rotation_first(pose.phi);
  const Eigen::Matrix4d tt = pose.matrix().transpose();

  PlaneSecondDeriv out;
  for (auto& row : out.G)
    for (auto& v : row) v.setZero();

  for (int k = 0; k < 3; ++k) {
    // (t_k, Π_l): offset row is t·n + d, so ∂²/∂t_k∂Π_l = ∂n_k/∂Π_l
    for (int l = 0; l < 3; ++l) {
      Eigen::Vector4d v = Eigen::Vector4d::Zero();
      v(3) = jc(k, l);
      out.G[k][6 + l] = v;
      out.G[6 + l][k] = v;
    }
    // (φ_k, φ_l)
    for (int l = k; l < 3; ++l) {
      Eigen::Vector4d v = Eigen::Vector4d::Zero();
      v.head<3>() = detail::rotation_second(pose.phi, k, l).transpose() * n;
      out.G[3 + k][3 + l] = v;
      out.G[3 + l][3 + k] = v;
    }
    // (φ_k, Π_l)
    for (int l = 0; l < 3; ++l) {
      Eigen::Vector4d v = Eigen::Vector4d::Zero();
      v.head<3>() = dr[k].transpose() * jc.block<3, 1>(0, l);
      out.G[3 + k][6 + l] = v;
      out.G[6 + l][3 + k] = v;
    }
  }
  // (Π_k, Π_l)
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) out.G[6 + k][6 + l] = tt * gc[k][l];
  return out;
}

/**
 * Gradient and Hessian of c' = π'ᵀQπ'/N:
 *   g_k  = (2/N) π'ᵀ Q ∂π'/∂x_k
 *   H_kl = (2/N) (∂π'/∂x_lᵀ Q ∂π'/∂x_k + π'ᵀ Q ∂²π'/∂x_k∂x_l)
 */
inline IntegratedLinearization integrated_linearization(const Pose& pose, const CpPlane& cp,
                                                        const GroupMatrix& g,
                                                        HessianMode mode = HessianMode::kFull) {
  if (g.empty()) throw EmptyGroupError("integrated metric on an empty group matrix");
  const Plane plane = cp_to_plane(cp);
  const Eigen::Vector4d pi_t = transform_plane(pose, plane);
  const Eigen::Matrix4d& q = g.matrix();
  const double scale = 2.0 / static_cast<double>(g.count());
  const Eigen::Vector4d w = q * pi_t;
  const PlaneJacobian jac = plane_jacobian(pose, cp);

  IntegratedLinearization lin;
  lin.cost = std::max(0.0, pi_t.dot(w)) / static_cast<double>(g.count());
  lin.gradient = scale * jac.J.transpose() * w;
  lin.hessian = scale * jac.J.transpose() * q * jac.J;
  if (mode == HessianMode::kFull) {
    const PlaneSecondDeriv sec = plane_second_deriv(pose, cp);
    for (int k = 0; k < kIntegratedDim; ++k)
      for (int l = 0; l < kIntegratedDim; ++l) lin.hessian(k, l) += scale * w.dot(sec.G[k][l]);
  }
  lin.hessian = 0.5 * (lin.hessian + lin.hessian.transpose()).eval();
  return lin;
}

/// Same as integrated_linearization for c' = πᵀMπ/N over Π only.
inline FixedLinearization fixed_linearization(const CpPlane& cp, const GroupMatrix& g,
                                              HessianMode mode = HessianMode::kFull) {
  if (g.empty()) throw EmptyGroupError("fixed metric on an empty group matrix");
  const Plane plane = cp_to_plane(cp);
  const Eigen::Vector4d pi = plane.coeffs();
  const Eigen::Matrix4d& m = g.matrix();
  const double scale = 2.0 / static_cast<double>(g.count());
  const Eigen::Vector4d w = m * pi;
  const CpJacobian jc = cp_jacobian(cp);

  FixedLinearization lin;
  lin.cost = std::max(0.0, pi.dot(w)) / static_cast<double>(g.count());
  lin.gradient = scale * jc.transpose() * w;
  lin.hessian = scale * jc.transpose() * m * jc;
  if (mode == HessianMode::kFull) {
    const CpSecondDeriv sec = cp_second_deriv(cp);
    for (int k = 0; k < kFixedDim; ++k)
      for (int l = 0; l < kFixedDim; ++l) lin.hessian(k, l) += scale * w.dot(sec[k][l]);
  }
  lin.hessian = 0.5 * (lin.hessian + lin.hessian.transpose()).eval();
  return lin;
}

}  // namespace rsoba
