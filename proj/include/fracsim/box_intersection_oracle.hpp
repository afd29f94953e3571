#pragma once

// Reference intersection test for two boxes that does not use projection axes.
//
// Two convex polytopes with a non-empty intersection always have a vertex of
// that intersection which is either a vertex of one box lying inside the other,
// or a point where an edge of one box pierces a face of the other. Both cases
// are found by clipping every edge of each box against the other box as a
// solid, so the test reduces to 24 segment-vs-box slab clips.

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "fracsim/obb.hpp"

namespace fracsim::oracle {

/// Box edges as vertex index pairs (vertex i has bit k set for +axis k).
inline constexpr std::array<std::pair<int, int>, 12> kBoxEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along axis 0
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along axis 1
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along axis 2
}};

/// Liang-Barsky clip of segment [a, b] against the closed solid box.
inline bool segment_hits_box(const Vec3& a, const Vec3& b, const Obb& box) {
  double t0 = 0.0;
  double t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double pa = (a - box.center).dot(box.axes[k]);
    const double pb = (b - box.center).dot(box.axes[k]);
    const double h = box.half_extents[k];
    const double dp = pb - pa;
    if (dp == 0.0) {
      if (pa < -h || pa > h) return false;
      continue;
    }
    double ta = (-h - pa) / dp;
    double tb = (h - pa) / dp;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

inline bool any_edge_hits(const Obb& from, const Obb& solid) {
  const auto v = from.vertices();
  return std::any_of(kBoxEdges.begin(), kBoxEdges.end(), [&](const auto& e) {
    return segment_hits_box(v[e.first], v[e.second], solid);
  });
}

/// True when the closed boxes share at least one point.
inline bool boxes_intersect(const Obb& a, const Obb& b) {
  return any_edge_hits(a, b) || any_edge_hits(b, a);
}

}  // namespace fracsim::oracle
