/**
 * \file evaluation.hpp
 * \brief Absolute trajectory error and voxel occupancy.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rsoba/errors.hpp"
#include "rsoba/trajectory.hpp"

namespace rsoba {

enum class Alignment { kSe3, kTranslation, kNone };

struct AteOptions {
  Alignment alignment = Alignment::kSe3;
  double max_time_difference = 0.02;  // seconds
};

struct AteResult {
  double rmse = 0.0;
  std::size_t pairs = 0;
  Eigen::Matrix4d alignment = Eigen::Matrix4d::Identity();
};

/// Pairs (estimate index, reference index) by nearest timestamp, each within
/// the tolerance. Both trajectories are sorted, so a merge walk suffices.
inline std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                                  const Trajectory& ref,
                                                                  double max_dt) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t j = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].stamp;
    while (j + 1 < ref.size() && std::abs(ref[j + 1].stamp - t) <= std::abs(ref[j].stamp - t)) ++j;
    if (ref.size() > 0 && std::abs(ref[j].stamp - t) <= max_dt) out.emplace_back(i, j);
  }
  return out;
}

inline AteResult ate(const Trajectory& estimate, const Trajectory& reference, const AteOptions& opts = {}) {
  const auto pairs = associate(estimate, reference, opts.max_time_difference);
  if (pairs.size() < 2) throw InvalidInputError("fewer than two associated poses for ATE");

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    src.col(k) = estimate[pairs[k].first].pose.t;
    dst.col(k) = reference[pairs[k].second].pose.t;
  }

  AteResult res;
  res.pairs = pairs.size();
  switch (opts.alignment) {
    case Alignment::kSe3:
      res.alignment = Eigen::umeyama(src, dst, false);
      break;
    case Alignment::kTranslation:
      res.alignment.block<3, 1>(0, 3) = dst.rowwise().mean() - src.rowwise().mean();
      break;
    case Alignment::kNone:
      break;
  }
  const Eigen::Matrix3d r = res.alignment.block<3, 3>(0, 0);
  const Eigen::Vector3d t = res.alignment.block<3, 1>(0, 3);
  double sq = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) sq += (r * src.col(k) + t - dst.col(k)).squaredNorm();
  res.rmse = std::sqrt(sq / static_cast<double>(n));
  return res;
}

inline double ate_rmse(const Trajectory& estimate, const Trajectory& reference, const AteOptions& opts = {}) {
  return ate(estimate, reference, opts).rmse;
}

/// Number of distinct floor-keyed cubes of side `voxel_size` containing a point.
inline std::size_t voxel_occupancy(std::span<const Eigen::Vector3d> points, double voxel_size = 0.1) {
  if (!(voxel_size > 0.0)) throw DomainError("voxel size must be positive");
  std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t>> cells;
  for (const auto& p : points) {
    cells.emplace(static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel_size)));
  }
  return cells.size();
}

}  // namespace rsoba
