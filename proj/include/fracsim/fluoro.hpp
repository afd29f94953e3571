#pragma once

// Simplified C-arm fluoroscopy: parallel-beam projection of the scene onto
// the C-arm image plane with additive opacity.
//
// C-arm frame: the beam travels along the frame's +z axis; image columns run
// along +x and image rows along -y (row 0 is the top of the image).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "fracsim/geom.hpp"
#include "fracsim/obb.hpp"
#include "fracsim/scene.hpp"
#include "fracsim/sim.hpp"

namespace fracsim {

struct CArmPose {
  Rotation rotation;
  Vec3 center = Vec3::Zero();

  Vec3 beam() const { return rotation * Vec3::UnitZ(); }
  Vec3 image_u() const { return rotation * Vec3::UnitX(); }
  Vec3 image_v() const { return rotation * Vec3::UnitY(); }
};

/// Applies a rotation about the world axes on top of the current C-arm pose.
inline CArmPose set_carm(const CArmPose& current, const EulerAngles& delta) {
  return CArmPose{euler_to_rotation(delta) * current.rotation, current.center};
}

struct MaterialOpacity {
  double bone = 0.8;
  double thigh = 0.1;
};

using Vec2 = Eigen::Vector2d;

struct ProjectedObject {
  std::variant<Obb, Capsule> shape;
  double opacity = 0.0;
};

struct Polyline {
  std::string label;
  std::vector<Vec2> points;  // image-plane mm, +u right, +v up
  bool closed = false;
};

struct FluoroImage {
  int width = 0;
  int height = 0;
  double pixel_size = 0.0;        // m
  std::vector<double> intensity;  // row-major, [0, 1]
  std::vector<Polyline> overlay;

  double at(int col, int row) const { return intensity[static_cast<std::size_t>(row) * width + col]; }
};

namespace fluoro_detail {

inline Vec2 project(const CArmPose& carm, const Vec3& p) {
  const Vec3 d = p - carm.center;
  return {d.dot(carm.image_u()), d.dot(carm.image_v())};
}

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Convex hull (counter-clockwise, monotone chain).
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  if (pts.size() < 3) return pts;
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross2(h[k - 1] - h[k - 2], pts[i - 1] - h[k - 2]) <= 0.0) --k;
    h[k++] = pts[i - 1];
  }
  h.resize(k - 1);
  return h;
}

inline bool inside_convex(const std::vector<Vec2>& hull, const Vec2& q) {
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    if (cross2(b - a, q - a) < 0.0) return false;
  }
  return true;
}

inline double segment_distance(const Vec2& a, const Vec2& b, const Vec2& q) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((q - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - q).norm();
}

struct Footprint {
  Vec2 lo, hi;
};

}  // namespace fluoro_detail

/// Image-plane silhouette of a box (convex hull of its projected corners), in m.
inline std::vector<Vec2> box_silhouette(const Obb& box, const CArmPose& carm) {
  std::vector<Vec2> pts;
  for (const auto& v : box.vertices()) pts.push_back(fluoro_detail::project(carm, v));
  return fluoro_detail::convex_hull(std::move(pts));
}

struct CaptureSettings {
  int width = 512;
  int height = 512;
  double pixel_size = 0.0005;  // m
};

/// Renders every object into an additive opacity image, then clamps to [0, 1].
inline FluoroImage capture(const std::vector<ProjectedObject>& objects, const CArmPose& carm,
                           const CaptureSettings& size,
                           const std::vector<std::pair<Vec3, Vec3>>& overlay_segments = {}) {
  using namespace fluoro_detail;
  FluoroImage img;
  img.width = size.width;
  img.height = size.height;
  img.pixel_size = size.pixel_size;
  img.intensity.assign(static_cast<std::size_t>(size.width) * size.height, 0.0);

  const double px = size.pixel_size;
  const double half_w = 0.5 * size.width * px;
  const double half_h = 0.5 * size.height * px;
  auto col_of = [&](double u) { return (u + half_w) / px - 0.5; };
  auto row_of = [&](double v) { return (half_h - v) / px - 0.5; };
  auto pixel_center = [&](int c, int r) {
    return Vec2((c + 0.5) * px - half_w, half_h - (r + 0.5) * px);
  };

  auto rasterize = [&](const Footprint& fp, double opacity, auto&& covers) {
    const int c0 = std::max(0, static_cast<int>(std::floor(col_of(fp.lo.x()))));
    const int c1 = std::min(size.width - 1, static_cast<int>(std::ceil(col_of(fp.hi.x()))));
    const int r0 = std::max(0, static_cast<int>(std::floor(row_of(fp.hi.y()))));
    const int r1 = std::min(size.height - 1, static_cast<int>(std::ceil(row_of(fp.lo.y()))));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (covers(pixel_center(c, r))) {
          img.intensity[static_cast<std::size_t>(r) * size.width + c] += opacity;
        }
      }
    }
  };

  auto to_mm = [](const std::vector<Vec2>& pts) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(p * 1000.0);
    return out;
  };

  for (const auto& obj : objects) {
    if (const auto* box = std::get_if<Obb>(&obj.shape)) {
      const auto hull = box_silhouette(*box, carm);
      Footprint fp{hull.front(), hull.front()};
      for (const auto& p : hull) {
        fp.lo = fp.lo.cwiseMin(p);
        fp.hi = fp.hi.cwiseMax(p);
      }
      rasterize(fp, obj.opacity, [&](const Vec2& q) { return inside_convex(hull, q); });
      img.overlay.push_back({std::string(to_string(box->label)), to_mm(hull), true});
    } else {
      const auto& cap = std::get<Capsule>(obj.shape);
      const Vec2 a = project(carm, cap.a);
      const Vec2 b = project(carm, cap.b);
      const Vec2 rr(cap.radius, cap.radius);
      const Footprint fp{a.cwiseMin(b) - rr, a.cwiseMax(b) + rr};
      rasterize(fp, obj.opacity,
                [&](const Vec2& q) { return segment_distance(a, b, q) <= cap.radius; });
    }
  }

  for (std::size_t i = 0; i < overlay_segments.size(); ++i) {
    const auto& [p, q] = overlay_segments[i];
    img.overlay.push_back(
        {"leg_" + std::to_string(i + 1), to_mm({project(carm, p), project(carm, q)}), false});
  }

  for (auto& v : img.intensity) v = std::clamp(v, 0.0, 1.0);
  return img;
}

/// Bones as boxes at bone opacity, the thigh capsule at thigh opacity, and the
/// robot legs as overlay segments.
inline std::vector<ProjectedObject> scene_objects(const Scene& scene,
                                                  const std::array<Obb, 2>& distal,
                                                  const MaterialOpacity& m) {
  std::vector<ProjectedObject> objs;
  if (scene.fluoro.thigh) objs.push_back({*scene.fluoro.thigh, m.thigh});
  for (const auto& b : scene.proximal) objs.push_back({b, m.bone});
  for (const auto& b : distal) objs.push_back({b, m.bone});
  return objs;
}

inline std::vector<std::pair<Vec3, Vec3>> leg_segments(const Scene& scene, const Pose& ring) {
  std::vector<std::pair<Vec3, Vec3>> legs;
  for (int i = 0; i < 3; ++i) {
    legs.emplace_back(scene.rsr.fixed_anchors[i], ring.transform_point(scene.rsr.moving_anchors[i]));
  }
  return legs;
}

inline FluoroImage capture_scene(const Scene& scene, const Pose& ring_pose, const CArmPose& carm) {
  const auto distal = attach_distal(ring_pose, scene.distal);
  const MaterialOpacity m{scene.fluoro.bone_opacity, scene.fluoro.thigh_opacity};
  return capture(scene_objects(scene, distal, m), carm,
                 {scene.fluoro.width_px, scene.fluoro.height_px, scene.fluoro.pixel_size},
                 leg_segments(scene, ring_pose));
}

inline CArmPose default_carm(const Scene& scene) {
  return {scene.fluoro.carm_rotation, scene.fluoro.carm_center};
}

/// Binary 8-bit PGM.
inline void write_pgm(std::ostream& out, const FluoroImage& img) {
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (double v : img.intensity) {
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
  }
}

/// Overlay polylines as a standalone SVG in image-plane mm (y flipped so the
/// drawing matches the raster orientation).
inline void write_overlay_svg(std::ostream& out, const FluoroImage& img) {
  const double w = img.width * img.pixel_size * 1000.0;
  const double h = img.height * img.pixel_size * 1000.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << -w / 2 << ' ' << -h / 2 << ' '
      << w << ' ' << h << "\">\n";
  for (const auto& pl : img.overlay) {
    out << "  <" << (pl.closed ? "polygon" : "polyline") << " id=\"" << pl.label << "\" points=\"";
    for (std::size_t i = 0; i < pl.points.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", i ? " " : "", pl.points[i].x() + 0.0, 0.0 - pl.points[i].y());
      out << buf;
    }
    out << "\" fill=\"none\" stroke=\"" << (pl.closed ? "white" : "yellow") << "\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace fracsim
