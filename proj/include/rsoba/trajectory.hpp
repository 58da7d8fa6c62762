/**
 * \file trajectory.hpp
 * \brief Timestamped trajectories, TUM text serialization and plain x-y-z
 *        point files.
 *
 * TUM lines are `timestamp tx ty tz qx qy qz qw`; blank lines and lines
 * starting with '#' are skipped.
 */
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rsoba/errors.hpp"
#include "rsoba/geometry.hpp"

namespace rsoba {

struct StampedPose {
  double stamp = 0.0;
  Pose pose;
};

/// Poses ordered by strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<StampedPose> poses) : poses_(std::move(poses)) { validate(); }

  void push_back(double stamp, const Pose& pose) {
    if (!poses_.empty() && !(stamp > poses_.back().stamp))
      throw InvalidInputError("trajectory timestamps must be strictly increasing");
    poses_.push_back({stamp, pose});
  }

  const std::vector<StampedPose>& poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const StampedPose& operator[](std::size_t i) const { return poses_[i]; }

 private:
  void validate() const {
    for (std::size_t i = 1; i < poses_.size(); ++i)
      if (!(poses_[i].stamp > poses_[i - 1].stamp))
        throw InvalidInputError("trajectory timestamps must be strictly increasing");
  }

  std::vector<StampedPose> poses_;
};

inline std::string format_tum_line(double stamp, const Pose& pose) {
  const Eigen::Quaterniond q = pose_quaternion(pose);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f", stamp, pose.t.x(),
                pose.t.y(), pose.t.z(), q.x(), q.y(), q.z(), q.w());
  return buf;
}

inline std::string to_tum(const Trajectory& traj) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& sp : traj.poses()) out += format_tum_line(sp.stamp, sp.pose) + "\n";
  return out;
}

inline Trajectory parse_tum(std::istream& in) {
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v[8];
    for (double& x : v)
      if (!(ss >> x)) throw InvalidInputError("malformed TUM line " + std::to_string(lineno));
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 0.5)) throw InvalidInputError("invalid quaternion on TUM line " + std::to_string(lineno));
    traj.push_back(v[0], pose_from_quaternion({v[1], v[2], v[3]}, q));
  }
  return traj;
}

inline Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot read " + path.string());
  return parse_tum(in);
}

/// Write via a temporary file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInputError("cannot write " + tmp.string());
    out << content;
    if (!out) throw InvalidInputError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_tum(const std::filesystem::path& path, const Trajectory& traj) {
  write_file_atomic(path, to_tum(traj));
}

inline std::string to_xyz(const std::vector<Eigen::Vector3d>& points) {
  std::string out;
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f\n", p.x(), p.y(), p.z());
    out += buf;
  }
  return out;
}

inline std::vector<Eigen::Vector3d> read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot read " + path.string());
  std::vector<Eigen::Vector3d> points;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    Eigen::Vector3d p;
    if (!(ss >> p.x() >> p.y() >> p.z()) || !p.allFinite())
      throw InvalidInputError("malformed point in " + path.string());
    points.push_back(p);
  }
  return points;
}

}  // namespace rsoba
