#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "rsoba/errors.hpp"
#include "rsoba/geometry.hpp"
#include "rsoba/group_metrics.hpp"

namespace rsoba {

using FrameId = std::uint64_t;
using LandmarkId = std::uint64_t;

struct Keyframe {
  FrameId id = 0;
  double stamp = 0.0;
  Pose pose;
};

/// Q_{i,j}: points of landmark j seen in frame i, in the frame's LiDAR coordinates.
struct Observation {
  FrameId frame = 0;
  LandmarkId landmark = 0;
  GroupMatrix group;
};

/// Sliding window: keyframes oldest first, plane landmarks, per-frame
/// observations and the marginalized fixed group matrices.
struct Window {
  std::vector<Keyframe> frames;
  std::map<LandmarkId, CpPlane> landmarks;
  std::vector<Observation> observations;
  std::map<LandmarkId, GroupMatrix> fixed;

  std::ptrdiff_t frame_index(FrameId id) const {
    for (std::size_t i = 0; i < frames.size(); ++i)
      if (frames[i].id == id) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  std::map<FrameId, std::size_t> frame_lookup() const {
    std::map<FrameId, std::size_t> out;
    for (std::size_t i = 0; i < frames.size(); ++i) out.emplace(frames[i].id, i);
    return out;
  }

  void validate() const {
    const auto lookup = frame_lookup();
    if (lookup.size() != frames.size()) throw InvalidInputError("duplicate keyframe id in window");
    for (const auto& f : frames) f.pose.validate();
    for (const auto& [id, cp] : landmarks) cp_to_plane(cp);
    std::set<std::pair<FrameId, LandmarkId>> seen;
    for (const auto& obs : observations) {
      if (!lookup.contains(obs.frame)) throw InvalidInputError("observation references unknown frame");
      if (!landmarks.contains(obs.landmark))
        throw InvalidInputError("observation references unknown landmark");
      if (!seen.emplace(obs.frame, obs.landmark).second)
        throw InvalidInputError("duplicate (frame, landmark) observation");
    }
    for (const auto& [id, g] : fixed)
      if (!landmarks.contains(id)) throw InvalidInputError("fixed group matrix for unknown landmark");
  }
};

}  // namespace rsoba
