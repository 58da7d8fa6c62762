/**
 * \file geometry.hpp
 * \brief SE(3) keyframe poses in an Euler-angle chart, plane landmarks and
 *        the coordinate transforms the group metrics are built on.
 */
#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rsoba/errors.hpp"

namespace rsoba {

/// |phi_y| must stay this far from pi/2.
inline constexpr double kGimbalMargin = 1e-6;
/// Smallest admissible |d| (and |Pi|) of a plane in the closest-point chart.
inline constexpr double kMinPlaneOffset = 1e-4;
/// Tolerance on |n| = 1.
inline constexpr double kUnitNormTolerance = 1e-9;

inline constexpr double max_abs_pitch() { return std::numbers::pi / 2.0 - kGimbalMargin; }

/**
 * \brief Elementary rotation about one coordinate axis, or one of its
 *        derivatives with respect to the angle.
 *
 * order 0 is the rotation itself, order 1 and 2 the first and second
 * derivatives. Derivatives zero the entry on the rotation axis.
 */
inline Eigen::Matrix3d axis_rotation(int axis, double angle, int order = 0) {
  // d^k/dθ^k of (cos θ, sin θ) is (cos, sin) evaluated at θ + kπ/2.
  const double shifted = angle + order * std::numbers::pi / 2.0;
  const double c = std::cos(shifted);
  const double s = std::sin(shifted);
  const int a = (axis + 1) % 3;
  const int b = (axis + 2) % 3;
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(axis, axis) = order == 0 ? 1.0 : 0.0;
  m(a, a) = c;
  m(a, b) = -s;
  m(b, a) = s;
  m(b, b) = c;
  return m;
}

inline void check_euler_domain(const Eigen::Vector3d& phi) {
  if (!phi.allFinite()) throw DomainError("euler angles are not finite");
  if (std::abs(phi.y()) > max_abs_pitch())
    throw DomainError("pitch angle " + std::to_string(phi.y()) + " is at gimbal lock");
}

/// R = Rx(φx) Ry(φy) Rz(φz), entries written out exactly as the printed matrix.
inline Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& phi) {
  check_euler_domain(phi);
  const double sx = std::sin(phi.x()), cx = std::cos(phi.x());
  const double sy = std::sin(phi.y()), cy = std::cos(phi.y());
  const double sz = std::sin(phi.z()), cz = std::cos(phi.z());
  Eigen::Matrix3d r;
  r << cy * cz, -cy * sz, sy,
       cx * sz + sx * sy * cz, cx * cz - sx * sy * sz, -sx * cy,
       sx * sz - cx * sy * cz, cx * sy * sz + sx * cz, cx * cy;
  return r;
}

/// Inverse of euler_to_rotation on the chart with cos(φy) > 0.
inline Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& r) {
  const double cy = std::hypot(r(0, 0), r(0, 1));
  Eigen::Vector3d phi(std::atan2(-r(1, 2), r(2, 2)), std::atan2(r(0, 2), cy),
                      std::atan2(-r(0, 1), r(0, 0)));
  check_euler_domain(phi);
  return phi;
}

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

/// Keyframe pose: translation plus (φx, φy, φz) Euler angles.
struct Pose {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  static Pose from_matrix(const Eigen::Matrix4d& m) {
    return {m.block<3, 1>(0, 3), rotation_to_euler(m.block<3, 3>(0, 0))};
  }

  static Pose from_rotation(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    return {t, rotation_to_euler(r)};
  }

  Eigen::Matrix3d rotation() const { return euler_to_rotation(phi); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotation();
    m.block<3, 1>(0, 3) = t;
    return m;
  }

  void validate() const {
    if (!t.allFinite()) throw DomainError("pose translation is not finite");
    check_euler_domain(phi);
  }

  bool operator==(const Pose&) const = default;
};

inline Pose compose(const Pose& a, const Pose& b) {
  return Pose::from_matrix(a.matrix() * b.matrix());
}

inline Pose invert(const Pose& a) {
  const Eigen::Matrix3d rt = a.rotation().transpose();
  return Pose::from_rotation(rt, -rt * a.t);
}

/// Hesse form plane: n·x + d = 0 with unit normal n.
struct Plane {
  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  double d = 0.0;

  Eigen::Vector4d coeffs() const { return {n.x(), n.y(), n.z(), d}; }

  void validate() const {
    if (!n.allFinite() || !std::isfinite(d)) throw DomainError("plane is not finite");
    if (std::abs(n.norm() - 1.0) > kUnitNormTolerance) throw DomainError("plane normal is not unit");
  }
};

/// Closest-point plane parameterization Π = d·n.
struct CpPlane {
  Eigen::Vector3d pi = Eigen::Vector3d::UnitZ();
};

/// Homogeneous point [x, y, z, 1].
struct HomoPoint {
  Eigen::Vector4d p = Eigen::Vector4d::UnitW();

  HomoPoint() = default;
  explicit HomoPoint(const Eigen::Vector3d& x) : p(x.x(), x.y(), x.z(), 1.0) {}

  Eigen::Vector3d euclidean() const { return p.head<3>(); }
};

inline Plane cp_to_plane(const CpPlane& cp) {
  const double norm = cp.pi.norm();
  if (!(norm >= kMinPlaneOffset)) throw DegeneratePlaneError("closest-point plane too close to origin");
  return {cp.pi / norm, norm};
}

inline CpPlane plane_to_cp(const Plane& plane) {
  plane.validate();
  if (!(std::abs(plane.d) >= kMinPlaneOffset)) throw DegeneratePlaneError("plane passes through the origin");
  return {plane.d * plane.n};
}

/// Distance of a local point to the plane after moving it with T.
inline double point_to_plane(const Plane& plane, const Pose& pose, const HomoPoint& p) {
  return plane.coeffs().dot(pose.matrix() * p.p);
}

inline double fixed_point_to_plane(const Plane& plane, const HomoPoint& p) {
  return plane.coeffs().dot(p.p);
}

/// π' = Tᵀπ = [Rᵀn ; tᵀn + d].
inline Eigen::Vector4d transform_plane(const Pose& pose, const Eigen::Vector4d& pi) {
  const Eigen::Vector3d n = pi.head<3>();
  Eigen::Vector4d out;
  out.head<3>() = pose.rotation().transpose() * n;
  out(3) = pose.t.dot(n) + pi(3);
  return out;
}

inline Eigen::Vector4d transform_plane(const Pose& pose, const Plane& plane) {
  return transform_plane(pose, plane.coeffs());
}

inline Eigen::Quaterniond pose_quaternion(const Pose& pose) {
  return Eigen::Quaterniond(pose.rotation()).normalized();
}

inline Pose pose_from_quaternion(const Eigen::Vector3d& t, const Eigen::Quaterniond& q) {
  return Pose::from_rotation(q.normalized().toRotationMatrix(), t);
}

}  // namespace rsoba
