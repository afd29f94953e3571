#pragma once

// Oriented bounding boxes and separating-axis contact queries.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fracsim/geom.hpp"

namespace fracsim {

enum class BoneLabel { ProximalShaft, ProximalHead, DistalShaft, DistalCondyle };

inline std::string_view to_string(BoneLabel l) {
  switch (l) {
    case BoneLabel::ProximalShaft: return "proximal_shaft";
    case BoneLabel::ProximalHead: return "proximal_head";
    case BoneLabel::DistalShaft: return "distal_shaft";
    case BoneLabel::DistalCondyle: return "distal_condyle";
  }
  return "unknown";
}

inline std::optional<BoneLabel> bone_label_from_string(std::string_view s) {
  for (auto l : {BoneLabel::ProximalShaft, BoneLabel::ProximalHead, BoneLabel::DistalShaft,
                 BoneLabel::DistalCondyle}) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

struct Obb {
  Vec3 center = Vec3::Zero();
  std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  Vec3 half_extents = Vec3::Ones();
  BoneLabel label = BoneLabel::ProximalShaft;

  static Obb from_pose(const Pose& pose, const Vec3& half_extents, BoneLabel label) {
    const Mat3 m = pose.orientation.matrix();
    return Obb{pose.position, {m.col(0), m.col(1), m.col(2)}, half_extents, label};
  }

  std::array<Vec3, 8> vertices() const {
    std::array<Vec3, 8> v;
    for (int i = 0; i < 8; ++i) {
      const double sx = (i & 1) ? 1.0 : -1.0;
      const double sy = (i & 2) ? 1.0 : -1.0;
      const double sz = (i & 4) ? 1.0 : -1.0;
      v[i] = center + sx * half_extents.x() * axes[0] + sy * half_extents.y() * axes[1] +
             sz * half_extents.z() * axes[2];
    }
    return v;
  }
};

inline constexpr double kAxisTolerance = 1e-9;

/// Checks axis orthonormality and positive extents.
inline bool is_valid(const Obb& b, double tol = kAxisTolerance) {
  for (int i = 0; i < 3; ++i) {
    if (!b.center.allFinite() || !b.axes[i].allFinite()) return false;
    if (std::abs(b.axes[i].norm() - 1.0) > tol) return false;
    if (!(b.half_extents[i] > 0.0)) return false;
    for (int j = i + 1; j < 3; ++j) {
      if (std::abs(b.axes[i].dot(b.axes[j])) > tol) return false;
    }
  }
  return true;
}

struct ProjectionInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// Candidate axes are enumerated in a fixed order: the three face normals of the
// first box (0..2), those of the second box (3..5), then the nine edge cross
// products a_i x b_j at index 6 + 3*i + j.
inline constexpr int kAxisCount = 15;
inline constexpr double kDegenerateCrossNorm = 1e-8;

struct CandidateAxis {
  int index = 0;
  Vec3 axis = Vec3::Zero();
};

inline std::vector<CandidateAxis> candidate_axes(const Obb& p, const Obb& d) {
  std::vector<CandidateAxis> out;
  out.reserve(kAxisCount);
  for (int i = 0; i < 3; ++i) out.push_back({i, p.axes[i].normalized()});
  for (int j = 0; j < 3; ++j) out.push_back({3 + j, d.axes[j].normalized()});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec3 c = p.axes[i].cross(d.axes[j]);
      const double n = c.norm();
      if (n < kDegenerateCrossNorm) continue;  // parallel edges, redundant with faces
      out.push_back({6 + 3 * i + j, c / n});
    }
  }
  return out;
}

/// Radius of the box projected on a unit axis.
inline double project_extent(const Obb& b, const Vec3& axis) {
  return b.half_extents.x() * std::abs(b.axes[0].dot(axis)) +
         b.half_extents.y() * std::abs(b.axes[1].dot(axis)) +
         b.half_extents.z() * std::abs(b.axes[2].dot(axis));
}

inline ProjectionInterval project_interval(const Obb& b, const Vec3& axis) {
  const double c = b.center.dot(axis);
  const double e = project_extent(b, axis);
  return {c - e, c + e};
}

/// Signed overlap of two intervals; negative means a gap.
inline double axis_overlap(const ProjectionInterval& a, const ProjectionInterval& b) {
  return std::min(a.hi, b.hi) - std::max(a.lo, b.lo);
}

struct ContactResult {
  bool colliding = false;
  double depth = 0.0;           // m, 0 when separated
  Vec3 normal = Vec3::Zero();   // unit, points from the first box toward the second
  std::optional<int> axis_index;
  BoneLabel first = BoneLabel::ProximalShaft;
  BoneLabel second = BoneLabel::DistalShaft;
  // Smallest signed overlap over all tested axes. Equals depth when colliding;
  // negative (the widest gap found) when a separating axis exists.
  double smallest_overlap = 0.0;
};

/// SAT contact between two boxes. Colliding iff every candidate axis has a
/// strictly positive overlap; the axis of least overlap gives depth and normal.
/// Ties keep the lowest axis index.
inline ContactResult sat_contact(const Obb& p, const Obb& d) {
  ContactResult r;
  r.first = p.label;
  r.second = d.label;

  double smallest = std::numeric_limits<double>::infinity();
  double widest_gap = std::numeric_limits<double>::infinity();
  const CandidateAxis* best = nullptr;
  bool separated = false;

  const auto axes = candidate_axes(p, d);
  for (const auto& cand : axes) {
    const double ol = axis_overlap(project_interval(p, cand.axis), project_interval(d, cand.axis));
    if (ol <= 0.0) {
      // Keep scanning so smallest_overlap reports the widest gap.
      separated = true;
      widest_gap = std::min(widest_gap, ol);
      continue;
    }
    if (ol < smallest) {
      smallest = ol;
      best = &cand;
    }
  }

  if (separated || best == nullptr) {
    r.smallest_overlap = separated ? widest_gap : 0.0;
    return r;
  }

  r.colliding = true;
  r.depth = smallest;
  r.smallest_overlap = smallest;
  r.axis_index = best->index;
  r.normal = (d.center - p.center).dot(best->axis) > 0.0 ? best->axis : Vec3(-best->axis);
  return r;
}

/// One result per (distal, proximal) pair: distal-major order, i.e.
/// index = distal_index * proximal.size() + proximal_index.
inline std::vector<ContactResult> scene_contacts(std::span<const Obb> proximal,
                                                 std::span<const Obb> distal) {
  std::vector<ContactResult> out;
  out.reserve(proximal.size() * distal.size());
  for (const auto& d : distal) {
    for (const auto& p : proximal) out.push_back(sat_contact(p, d));
  }
  return out;
}

/// Bit i set when contact i is colliding.
inline unsigned collision_mask(std::span<const ContactResult> contacts) {
  unsigned mask = 0;
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    if (contacts[i].colliding) mask |= 1u << i;
  }
  return mask;
}

}  // namespace fracsim
