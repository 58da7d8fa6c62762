/**
 * \file group_metrics.hpp
 * \brief Point-cluster group matrices and the group metrics evaluated on them.
 *
 * A group matrix S = Σ p̃p̃ᵀ summarizes a point set so that the sum of its
 * squared point-to-plane distances is a single quadratic form in the plane.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "rsoba/errors.hpp"
#include "rsoba/geometry.hpp"

namespace rsoba {

class GroupMatrix {
 public:
  GroupMatrix() = default;

  static GroupMatrix from_points(std::span<const Eigen::Vector3d> points) {
    GroupMatrix g;
    for (const auto& p : points) g.add(HomoPoint(p));
    return g;
  }

  void add(const HomoPoint& p) {
    s_.noalias() += p.p * p.p.transpose();
    ++n_;
  }

  GroupMatrix& operator+=(const GroupMatrix& other) {
    s_ += other.s_;
    n_ += other.n_;
    return *this;
  }

  const Eigen::Matrix4d& matrix() const { return s_; }
  std::int64_t count() const { return n_; }
  bool empty() const { return n_ == 0; }

  /// Mean of the points, i.e. the upper-right column divided by N.
  Eigen::Vector3d centroid() const { return s_.block<3, 1>(0, 3) / static_cast<double>(n_); }

  /**
   * Checks symmetry, the corner count and positive semidefiniteness
   * (smallest eigenvalue no lower than -1e-9 * trace).
   */
  bool is_consistent() const {
    if (n_ < 0) return false;
    if (n_ == 0) return s_.isZero(0.0);
    if (s_(3, 3) != static_cast<double>(n_)) return false;
    const double scale = std::max(1.0, s_.cwiseAbs().maxCoeff());
    if ((s_ - s_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(s_, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0) >= -1e-9 * s_.trace();
  }

  /// S' = T S Tᵀ, the group matrix of the same points expressed in the map frame.
  GroupMatrix transformed(const Pose& pose) const {
    const Eigen::Matrix4d t = pose.matrix();
    const Eigen::Matrix4d m = t * s_ * t.transpose();
    GroupMatrix out;
    out.s_ = 0.5 * (m + m.transpose());
    out.s_(3, 3) = s_(3, 3);
    out.n_ = n_;
    return out;
  }

  /// Row-major 16 entries followed by N, full round-trip precision.
  friend std::ostream& operator<<(std::ostream& os, const GroupMatrix& g) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << std::setprecision(17);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) os << g.s_(r, c) << ' ';
    os << g.n_;
    os.flags(flags);
    os.precision(prec);
    return os;
  }

  friend std::istream& operator>>(std::istream& is, GroupMatrix& g) {
    GroupMatrix tmp;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) is >> tmp.s_(r, c);
    is >> tmp.n_;
    if (is) {
      if (!tmp.is_consistent()) throw InvalidInputError("group matrix text is inconsistent");
      g = tmp;
    }
    return is;
  }

 private:
  Eigen::Matrix4d s_ = Eigen::Matrix4d::Zero();
  std::int64_t n_ = 0;
};

inline GroupMatrix accumulate(GroupMatrix g, const HomoPoint& p) {
  g.add(p);
  return g;
}

inline GroupMatrix merge(GroupMatrix a, const GroupMatrix& b) {
  a += b;
  return a;
}

/// π'ᵀ S π' for an already transformed plane vector. Clamped at zero since
/// the form is PSD and only rounding can push it below.
inline double quadratic_cost(const Eigen::Vector4d& plane, const GroupMatrix& g) {
  if (g.empty()) throw EmptyGroupError("group metric on an empty group matrix");
  return std::max(0.0, plane.dot(g.matrix() * plane));
}

/// Integrated group metric πᵀ T Q Tᵀ π.
inline double group_cost(const Plane& plane, const Pose& pose, const GroupMatrix& g) {
  return quadratic_cost(transform_plane(pose, plane), g);
}

/// Fixed group metric πᵀ M π.
inline double fixed_group_cost(const Plane& plane, const GroupMatrix& g) {
  return quadratic_cost(plane.coeffs(), g);
}

/// Integrated mean square group metric.
inline double msgm(const Plane& plane, const Pose& pose, const GroupMatrix& g) {
  return group_cost(plane, pose, g) / static_cast<double>(g.count());
}

inline double fixed_msgm(const Plane& plane, const GroupMatrix& g) {
  return fixed_group_cost(plane, g) / static_cast<double>(g.count());
}

inline GroupMatrix marginalize_into_fixed(const GroupMatrix& g, const Pose& pose) {
  return g.transformed(pose);
}

}  // namespace rsoba
