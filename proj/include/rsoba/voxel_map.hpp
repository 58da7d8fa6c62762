/**
 * \file voxel_map.hpp
 * \brief Hash adaptive voxel map: root voxels keyed by floor(x / r_max),
 *        recursively split into octants until their points are planar.
 *
 * Each planar leaf owns one plane landmark. Points that later fall into a
 * plane leaf are folded straight into that landmark's per-frame group
 * matrix; pending voxels buffer raw local points until they can be fit.
 * When the oldest keyframe leaves the window its group matrices are moved to
 * the map frame and merged into the landmarks' fixed matrices.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "rsoba/errors.hpp"
#include "rsoba/geometry.hpp"
#include "rsoba/group_metrics.hpp"
#include "rsoba/window.hpp"

namespace rsoba {

struct VoxelKey {
  std::int64_t x = 0, y = 0, z = 0;
  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // large primes, as in the usual spatial hash
    return static_cast<std::size_t>((k.x * 73856093) ^ (k.y * 19349669) ^ (k.z * 83492791));
  }
};

/// floor, not truncation, so negative coordinates land in the right cell.
inline VoxelKey voxel_key(const Eigen::Vector3d& p, double size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / size)),
          static_cast<std::int64_t>(std::floor(p.y() / size)),
          static_cast<std::int64_t>(std::floor(p.z() / size))};
}

struct VoxelMapConfig {
  double r_max = 1.0;                  // root voxel side (m)
  int d_max = 4;                       // deepest subdivision level
  int n_min = 10;                      // points needed before fitting
  double planarity_max_eigen = 0.0025; // smallest covariance eigenvalue bound (m^2)
  double planarity_ratio = 0.1;        // smallest / middle eigenvalue bound
  double min_plane_spread = 0.01;      // middle eigenvalue lower bound (m^2); 0 disables
  double min_plane_offset = kMinPlaneOffset;
};

struct PlaneLandmark {
  LandmarkId id = 0;
  CpPlane plane;
  GroupMatrix fixed;
  std::map<FrameId, GroupMatrix> observations;
};

struct AdaptiveVoxel {
  enum class State { kPending, kPlane, kSplit, kRejected };

  int depth = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double half = 0.5;
  State state = State::kPending;
  bool dirty = false;
  /// Buffered points while pending: local coordinates per keyframe, plus
  /// map-frame points of keyframes that already left the window.
  std::map<FrameId, std::vector<Eigen::Vector3d>> local_points;
  std::vector<Eigen::Vector3d> fixed_points;
  LandmarkId landmark = 0;
  std::array<std::unique_ptr<AdaptiveVoxel>, 8> children;

  /// Half-open cube [center - half, center + half).
  bool contains(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d lo = center.array() - half;
    const Eigen::Vector3d hi = center.array() + half;
    return (p.array() >= lo.array()).all() && (p.array() < hi.array()).all();
  }

  int child_index(const Eigen::Vector3d& p) const {
    return (p.x() >= center.x() ? 1 : 0) | (p.y() >= center.y() ? 2 : 0) | (p.z() >= center.z() ? 4 : 0);
  }

  std::size_t buffered_points() const {
    std::size_t n = fixed_points.size();
    for (const auto& [f, pts] : local_points) n += pts.size();
    return n;
  }

  int max_depth() const {
    int d = depth;
    for (const auto& c : children)
      if (c) d = std::max(d, c->max_depth());
    return d;
  }
};

class VoxelMap {
 public:
  explicit VoxelMap(VoxelMapConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.r_max > 0.0) || cfg_.d_max < 0 || cfg_.n_min < 3 || !(cfg_.min_plane_spread >= 0.0))
      throw InvalidInputError("invalid voxel map configuration");
  }

  const VoxelMapConfig& config() const { return cfg_; }
  const std::vector<Keyframe>& keyframes() const { return frames_; }
  const std::map<LandmarkId, PlaneLandmark>& landmarks() const { return landmarks_; }
  std::size_t num_roots() const { return roots_.size(); }

  const AdaptiveVoxel* root(const VoxelKey& key) const {
    const auto it = roots_.find(key);
    return it == roots_.end() ? nullptr : it->second.get();
  }

  /// Deepest voxel containing a map-frame point, or nullptr.
  const AdaptiveVoxel* locate(const Eigen::Vector3d& p) const {
    const AdaptiveVoxel* v = root(voxel_key(p, cfg_.r_max));
    while (v && v->state == AdaptiveVoxel::State::kSplit) v = v->children[v->child_index(p)].get();
    return v;
  }

  /// Add a keyframe: its local points are bucketed by their map-frame position.
  void insert_frame(FrameId id, double stamp, std::span<const Eigen::Vector3d> local_points,
                    const Pose& pose) {
    pose.validate();
    for (const auto& f : frames_)
      if (f.id == id) throw InvalidInputError("keyframe " + std::to_string(id) + " already in map");
    frames_.push_back({id, stamp, pose});
    const Eigen::Matrix4d t = pose.matrix();
    for (const auto& p : local_points) {
      const Eigen::Vector3d world = (t * p.homogeneous()).head<3>();
      const VoxelKey key = voxel_key(world, cfg_.r_max);
      auto& slot = roots_[key];
      if (!slot) {
        slot = std::make_unique<AdaptiveVoxel>();
        slot->center = (Eigen::Vector3d(key.x, key.y, key.z).array() + 0.5) * cfg_.r_max;
        slot->half = 0.5 * cfg_.r_max;
      }
      route(*slot, id, p, world);
    }
  }

  /// Fit or split every pending voxel that received points since the last call.
  void fit_pending() {
    for (AdaptiveVoxel* v : sorted_roots()) visit_pending(*v);
  }

  /// Window over the keyframes currently in the map. Landmarks without
  /// in-window observers and without fixed points are left out.
  Window build_window() const {
    if (frames_.empty()) throw InvalidInputError("empty window");
    Window w;
    w.frames = frames_;
    for (const auto& [id, lm] : landmarks_) {
      if (lm.observations.empty() && lm.fixed.empty()) continue;
      w.landmarks.emplace(id, lm.plane);
      for (const auto& [frame, g] : lm.observations) w.observations.push_back({frame, id, g});
      if (!lm.fixed.empty()) w.fixed.emplace(id, lm.fixed);
    }
    return w;
  }

  /// Write optimized poses and planes back.
  void apply(const Window& w) {
    for (const auto& f : w.frames)
      for (auto& mine : frames_)
        if (mine.id == f.id) mine.pose = f.pose;
    for (const auto& [id, cp] : w.landmarks) {
      auto it = landmarks_.find(id);
      if (it != landmarks_.end()) it->second.plane = cp;
    }
  }

  /**
   * Apply the window, marginalize the oldest keyframe into the fixed group
   * matrices, drop it and return the window over the remaining keyframes
   * (empty when no keyframe is left).
   */
  Window slide(const Window& w) {
    apply(w);
    if (frames_.empty()) return {};
    const Keyframe oldest = frames_.front();
    for (auto& [id, lm] : landmarks_) {
      auto it = lm.observations.find(oldest.id);
      if (it == lm.observations.end()) continue;
      lm.fixed += marginalize_into_fixed(it->second, oldest.pose);
      lm.observations.erase(it);
    }
    const Eigen::Matrix4d t = oldest.pose.matrix();
    for (AdaptiveVoxel* v : sorted_roots()) retire_frame(*v, oldest.id, t);
    frames_.erase(frames_.begin());
    if (frames_.empty()) return {};
    return build_window();
  }

 private:
  std::vector<AdaptiveVoxel*> sorted_roots() {
    std::vector<std::pair<VoxelKey, AdaptiveVoxel*>> items;
    items.reserve(roots_.size());
    for (auto& [k, v] : roots_) items.emplace_back(k, v.get());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<AdaptiveVoxel*> out;
    out.reserve(items.size());
    for (auto& [k, v] : items) out.push_back(v);
    return out;
  }

  const Pose& frame_pose(FrameId id) const {
    for (const auto& f : frames_)
      if (f.id == id) return f.pose;
    throw InvalidInputError("unknown keyframe " + std::to_string(id));
  }

  void route(AdaptiveVoxel& v, FrameId id, const Eigen::Vector3d& local, const Eigen::Vector3d& world) {
    switch (v.state) {
      case AdaptiveVoxel::State::kPending:
        v.local_points[id].push_back(local);
        v.dirty = true;
        break;
      case AdaptiveVoxel::State::kPlane:
        landmarks_.at(v.landmark).observations[id].add(HomoPoint(local));
        break;
      case AdaptiveVoxel::State::kSplit:
        route(*v.children[v.child_index(world)], id, local, world);
        break;
      case AdaptiveVoxel::State::kRejected:
        break;
    }
  }

  void visit_pending(AdaptiveVoxel& v) {
    if (v.state == AdaptiveVoxel::State::kSplit) {
      for (auto& c : v.children) visit_pending(*c);
    } else if (v.state == AdaptiveVoxel::State::kPending && v.dirty) {
      fit_or_subdivide(v);
    }
  }

  std::vector<Eigen::Vector3d> map_points(const AdaptiveVoxel& v) const {
    std::vector<Eigen::Vector3d> out = v.fixed_points;
    for (const auto& [frame, pts] : v.local_points) {
      const Eigen::Matrix4d t = frame_pose(frame).matrix();
      for (const auto& p : pts) out.push_back((t * p.homogeneous()).head<3>());
    }
    return out;
  }

  void clear_buffers(AdaptiveVoxel& v) {
    v.local_points.clear();
    v.fixed_points.clear();
    v.dirty = false;
  }

  void fit_or_subdivide(AdaptiveVoxel& v) {
    v.dirty = false;
    const std::vector<Eigen::Vector3d> pts = map_points(v);
    if (static_cast<int>(pts.size()) < cfg_.n_min) return;

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) cov.noalias() += (p - centroid) * (p - centroid).transpose();
    cov /= static_cast<double>(pts.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending

    const bool planar = ev(0) <= cfg_.planarity_max_eigen && ev(0) <= cfg_.planarity_ratio * ev(1);
    // a near-collinear strip leaves the plane free to spin about it: wait for
    // more points, as with fewer than n_min
    if (planar && ev(1) < cfg_.min_plane_spread) return;
    if (planar) {
      Eigen::Vector3d n = es.eigenvectors().col(0).normalized();
      double d = -n.dot(centroid);
      if (d < 0.0) {
        n = -n;
        d = -d;
      }
      if (d < cfg_.min_plane_offset) {
        // the closest-point chart cannot represent planes through the origin
        v.state = AdaptiveVoxel::State::kRejected;
        clear_buffers(v);
        return;
      }
      PlaneLandmark lm;
      lm.id = next_landmark_++;
      lm.plane = CpPlane{d * n};
      for (const auto& [frame, local] : v.local_points)
        lm.observations.emplace(frame, GroupMatrix::from_points(local));
      lm.fixed = GroupMatrix::from_points(v.fixed_points);
      v.landmark = lm.id;
      v.state = AdaptiveVoxel::State::kPlane;
      landmarks_.emplace(lm.id, std::move(lm));
      clear_buffers(v);
      return;
    }

    if (v.depth >= cfg_.d_max) {
      v.state = AdaptiveVoxel::State::kRejected;
      clear_buffers(v);
      return;
    }

    for (int c = 0; c < 8; ++c) {
      auto child = std::make_unique<AdaptiveVoxel>();
      child->depth = v.depth + 1;
      child->half = 0.5 * v.half;
      const Eigen::Vector3d sign((c & 1) ? 1.0 : -1.0, (c & 2) ? 1.0 : -1.0, (c & 4) ? 1.0 : -1.0);
      child->center = v.center + child->half * sign;
      v.children[c] = std::move(child);
    }
    for (const auto& [frame, local] : v.local_points) {
      const Eigen::Matrix4d t = frame_pose(frame).matrix();
      for (const auto& p : local) {
        const Eigen::Vector3d world = (t * p.homogeneous()).head<3>();
        auto& child = *v.children[v.child_index(world)];
        child.local_points[frame].push_back(p);
        child.dirty = true;
      }
    }
    for (const auto& p : v.fixed_points) {
      auto& child = *v.children[v.child_index(p)];
      child.fixed_points.push_back(p);
      child.dirty = true;
    }
    v.state = AdaptiveVoxel::State::kSplit;
    clear_buffers(v);
    for (auto& c : v.children)
      if (c->dirty) fit_or_subdivide(*c);
  }

  void retire_frame(AdaptiveVoxel& v, FrameId id, const Eigen::Matrix4d& t) {
    if (v.state == AdaptiveVoxel::State::kSplit) {
      for (auto& c : v.children) retire_frame(*c, id, t);
      return;
    }
    auto it = v.local_points.find(id);
    if (it == v.local_points.end()) return;
    for (const auto& p : it->second) v.fixed_points.push_back((t * p.homogeneous()).head<3>());
    v.local_points.erase(it);
  }

  VoxelMapConfig cfg_;
  std::vector<Keyframe> frames_;
  std::unordered_map<VoxelKey, std::unique_ptr<AdaptiveVoxel>, VoxelKeyHash> roots_;
  std::map<LandmarkId, PlaneLandmark> landmarks_;
  LandmarkId next_landmark_ = 0;
};

/// Keyframe selection on an odometry stream: enough time has passed and the
/// sensor moved or turned enough since the last keyframe.
struct KeyframeGate {
  bool enabled = true;
  double th_time = 0.25;  // s
  double th_pos = 0.1;    // m
  double th_deg = 0.05;   // degrees

  bool accept(double stamp, const Pose& pose) {
    if (!enabled || !has_last_) {
      remember(stamp, pose);
      return true;
    }
    const Pose delta = compose(invert(last_pose_), pose);
    const double angle = Eigen::AngleAxisd(delta.rotation()).angle() * 180.0 / std::numbers::pi;
    const bool moved = delta.t.norm() > th_pos || angle > th_deg;
    if (stamp - last_stamp_ > th_time && moved) {
      remember(stamp, pose);
      return true;
    }
    return false;
  }

 private:
  void remember(double stamp, const Pose& pose) {
    has_last_ = true;
    last_stamp_ = stamp;
    last_pose_ = pose;
  }

  bool has_last_ = false;
  double last_stamp_ = 0.0;
  Pose last_pose_;
};

}  // namespace rsoba
