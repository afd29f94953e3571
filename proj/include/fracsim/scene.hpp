#pragma once

// Scene configuration: geometry, bone boxes, controller parameters, timestep.
//
// The file format is sectioned key/value text:
//
//   # comment
//   [section]
//   key = value [value ...]
//
// Units are spelled out in key names (e.g. `dt_s`, `center_m`, `euler_deg`).
// Box sections are numbered: [proximal.1], [proximal.2], [distal.1], ...

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracsim/force.hpp"
#include "fracsim/geom.hpp"
#include "fracsim/kinematics.hpp"
#include "fracsim/obb.hpp"
#include "fracsim/teleop.hpp"

namespace fracsim {

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public SceneError {
 public:
  ParseError(int line, std::string field, const std::string& what)
      : SceneError("line " + std::to_string(line) + ": " + field + ": " + what),
        line_(line),
        field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

class ValidationError : public SceneError {
 public:
  using SceneError::SceneError;
};

struct DriveParams {
  double stiffness = 5000.0;
  double damping = 140.0;
  double force_limit = 200.0;
};

inline bool is_valid(const DriveParams& p) {
  return p.stiffness > 0.0 && p.damping > 0.0 && p.force_limit > 0.0;
}

struct DriveSet {
  DriveParams linear;  // prismatic actuators: N/m, N*s/m, N
  DriveParams rotary;  // rotary actuators: N*m/rad, N*m*s/rad, N*m
};

/// Distal box rigidly attached to the moving ring.
struct DistalBox {
  Pose offset;  // in the moving-ring frame
  Vec3 half_extents = Vec3::Ones();
  BoneLabel label = BoneLabel::DistalShaft;
};

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

struct FluoroConfig {
  int width_px = 512;
  int height_px = 512;
  double pixel_size = 0.0005;  // m
  Rotation carm_rotation;      // zero C-arm angles
  Vec3 carm_center = Vec3::Zero();
  double bone_opacity = 0.8;
  double thigh_opacity = 0.1;
  std::optional<Capsule> thigh;
};

struct Scene {
  RsrGeometry rsr = RsrGeometry::default_geometry();
  HcGeometry hc;
  Pose ring_home{Vec3(0.0, 0.0, 0.2), Rotation{}};
  std::vector<Obb> proximal;
  std::vector<DistalBox> distal;
  DriveSet drives;
  ForceParams force{1000.0, 10.0, 30.0};
  ScalingConfig scaling;
  double dt = 0.001;
  bool strict_constraint = false;
  FluoroConfig fluoro;
};

namespace scene_detail {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

using Section = std::map<std::string, Entry>;

struct Document {
  std::map<std::string, Section> sections;
  std::vector<std::string> order;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline Document tokenize(const std::string& text) {
  Document doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ParseError(line_no, line, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (doc.sections.count(section)) throw ParseError(line_no, section, "duplicate section");
      doc.sections[section];
      doc.order.push_back(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, line, "expected key = value");
    if (section.empty()) throw ParseError(line_no, line, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, line, "empty key");
    auto& sec = doc.sections[section];
    if (sec.count(key)) throw ParseError(line_no, section + "." + key, "duplicate key");
    sec[key] = Entry{value, line_no, false};
  }
  return doc;
}

class Reader {
 public:
  Reader(Document& doc, std::string section) : doc_(doc), name_(std::move(section)) {
    auto it = doc_.sections.find(name_);
    sec_ = it == doc_.sections.end() ? nullptr : &it->second;
  }

  bool present() const { return sec_ != nullptr; }
  bool has(const std::string& key) const { return sec_ && sec_->count(key); }

  std::vector<double> numbers(const std::string& key, std::size_t n) {
    Entry& e = entry(key);
    std::istringstream in(e.value);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &pos);
      } catch (const std::exception&) {
        throw ParseError(e.line, field(key), "not a number: '" + tok + "'");
      }
      if (pos != tok.size() || !std::isfinite(v)) {
        throw ParseError(e.line, field(key), "not a finite number: '" + tok + "'");
      }
      out.push_back(v);
    }
    if (out.size() != n) {
      throw ParseError(e.line, field(key), "expected " + std::to_string(n) + " value(s), got " +
                                               std::to_string(out.size()));
    }
    return out;
  }

  double number(const std::string& key) { return numbers(key, 1)[0]; }
  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }
  Vec3 vec3(const std::string& key) {
    const auto v = numbers(key, 3);
    return {v[0], v[1], v[2]};
  }
  Vec3 vec3_or(const std::string& key, const Vec3& fallback) {
    return has(key) ? vec3(key) : fallback;
  }
  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    Entry& e = entry(key);
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ParseError(e.line, field(key), "expected true or false");
  }
  std::string text(const std::string& key) { return entry(key).value; }
  int line(const std::string& key) { return entry(key).line; }

  Rotation euler_deg_or(const std::string& key, const Rotation& fallback) {
    if (!has(key)) return fallback;
    const Vec3 e = vec3(key);
    return euler_to_rotation({deg_to_rad(e.x()), deg_to_rad(e.y()), deg_to_rad(e.z())});
  }

  std::string field(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  Entry& entry(const std::string& key) {
    if (!sec_ || !sec_->count(key)) throw ParseError(0, field(key), "missing required field");
    Entry& e = sec_->at(key);
    e.used = true;
    return e;
  }

  Document& doc_;
  std::string name_;
  Section* sec_ = nullptr;
};

inline void check(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

// Axes given explicitly so that non-orthonormal input is caught rather than
// silently repaired.
inline std::array<Vec3, 3> read_axes(Reader& r, const std::string& name) {
  if (r.has("euler_deg")) {
    const Mat3 m = r.euler_deg_or("euler_deg", Rotation{}).matrix();
    if (r.has("axis_x") || r.has("axis_y") || r.has("axis_z")) {
      throw ValidationError(name + ": give either euler_deg or axis_x/axis_y/axis_z, not both");
    }
    return {m.col(0), m.col(1), m.col(2)};
  }
  return {r.vec3_or("axis_x", Vec3::UnitX()), r.vec3_or("axis_y", Vec3::UnitY()),
          r.vec3_or("axis_z", Vec3::UnitZ())};
}

inline void check_axes(const std::array<Vec3, 3>& axes, const std::string& name) {
  for (int i = 0; i < 3; ++i) {
    check(std::abs(axes[i].norm() - 1.0) <= kAxisTolerance,
          name + ": axis " + std::to_string(i) + " is not unit length");
    for (int j = i + 1; j < 3; ++j) {
      check(std::abs(axes[i].dot(axes[j])) <= kAxisTolerance,
            name + ": axes " + std::to_string(i) + " and " + std::to_string(j) +
                " are not orthogonal");
    }
  }
  check(axes[0].cross(axes[1]).dot(axes[2]) > 0.0, name + ": axes are not right-handed");
}

inline DriveParams read_drive(Reader& r, const DriveParams& fallback) {
  DriveParams p;
  p.stiffness = r.number_or("stiffness", fallback.stiffness);
  p.damping = r.number_or("damping", fallback.damping);
  p.force_limit = r.number_or("force_limit", fallback.force_limit);
  return p;
}

}  // namespace scene_detail

/// Parses and fully validates a scene. Throws ParseError for malformed text
/// and ValidationError naming the violated invariant.
inline Scene load_scene(const std::string& text) {
  using namespace scene_detail;
  Document doc = tokenize(text);
  Scene s;

  {
    Reader r(doc, "sim");
    s.dt = r.number_or("dt_s", s.dt);
    s.strict_constraint = r.boolean_or("strict_constraint", s.strict_constraint);
    s.ring_home.position = r.vec3_or("ring_home_position_m", s.ring_home.position);
    s.ring_home.orientation = r.euler_deg_or("ring_home_euler_deg", s.ring_home.orientation);
  }
  {
    Reader r(doc, "scaling");
    s.scaling.max_v = r.number_or("max_v_m_s", s.scaling.max_v);
    s.scaling.max_w = r.number_or("max_w_rad_s", s.scaling.max_w);
  }
  {
    Reader r(doc, "force");
    s.force.k = r.number_or("k_n_m", s.force.k);
    s.force.c = r.number_or("c_ns_m", s.force.c);
    if (r.has("f_max_n")) {
      if (r.text("f_max_n") == "none") {
        s.force.f_max.reset();
      } else {
        s.force.f_max = r.number("f_max_n");
      }
    }
  }
  {
    Reader r(doc, "drive.linear");
    s.drives.linear = read_drive(r, s.drives.linear);
  }
  {
    Reader r(doc, "drive.rotary");
    s.drives.rotary = read_drive(r, s.drives.rotary);
  }
  {
    Reader r(doc, "rsr");
    if (r.present()) {
      for (int i = 0; i < 3; ++i) {
        const std::string n = std::to_string(i + 1);
        s.rsr.fixed_anchors[i] = r.vec3_or("fixed_anchor_" + n + "_m", s.rsr.fixed_anchors[i]);
        s.rsr.moving_anchors[i] = r.vec3_or("moving_anchor_" + n + "_m", s.rsr.moving_anchors[i]);
        s.rsr.rotary_axes[i] = r.vec3_or("rotary_axis_" + n, s.rsr.rotary_axes[i]);
      }
      s.rsr.actuator_min = r.number_or("actuator_min_m", s.rsr.actuator_min);
      s.rsr.actuator_max = r.number_or("actuator_max_m", s.rsr.actuator_max);
    }
  }
  {
    Reader r(doc, "hc");
    s.hc.base_radius = r.number_or("base_radius_m", s.hc.base_radius);
    s.hc.effector_radius = r.number_or("effector_radius_m", s.hc.effector_radius);
    s.hc.upper_arm = r.number_or("upper_arm_m", s.hc.upper_arm);
    s.hc.forearm = r.number_or("forearm_m", s.hc.forearm);
    s.hc.workspace_center = r.vec3_or("workspace_center_m", s.hc.workspace_center);
    if (r.has("wrist_axis_order")) {
      const auto v = r.numbers("wrist_axis_order", 3);
      for (int k = 0; k < 3; ++k) {
        check(v[k] == 0.0 || v[k] == 1.0 || v[k] == 2.0, "[hc] wrist_axis_order entries must be 0, 1 or 2");
        s.hc.wrist_axis_order[k] = static_cast<int>(v[k]);
      }
    }
  }
  {
    Reader r(doc, "fluoro");
    auto& f = s.fluoro;
    f.width_px = static_cast<int>(r.number_or("width_px", f.width_px));
    f.height_px = static_cast<int>(r.number_or("height_px", f.height_px));
    f.pixel_size = r.number_or("pixel_size_m", f.pixel_size);
    f.carm_rotation = r.euler_deg_or("carm_euler_deg", f.carm_rotation);
    f.carm_center = r.vec3_or("carm_center_m", f.carm_center);
    f.bone_opacity = r.number_or("bone_opacity", f.bone_opacity);
    f.thigh_opacity = r.number_or("thigh_opacity", f.thigh_opacity);
    if (r.has("thigh_a_m")) {
      f.thigh = Capsule{r.vec3("thigh_a_m"), r.vec3("thigh_b_m"), r.number("thigh_radius_m")};
    }
  }

  for (const auto& name : doc.order) {
    const bool is_prox = name.rfind("proximal.", 0) == 0;
    const bool is_dist = name.rfind("distal.", 0) == 0;
    if (!is_prox && !is_dist) continue;
    Reader r(doc, name);
    const auto label = bone_label_from_string(r.text("label"));
    if (!label) throw ParseError(r.line("label"), r.field("label"), "unknown bone label");
    const auto axes = read_axes(r, name);
    check_axes(axes, name);
    const Vec3 half = r.vec3("half_extents_m");
    check(half.minCoeff() > 0.0, name + ": half extents must be positive");
    if (is_prox) {
      s.proximal.push_back(Obb{r.vec3("center_m"), axes, half, *label});
    } else {
      Mat3 m;
      m << axes[0], axes[1], axes[2];
      s.distal.push_back(DistalBox{Pose{r.vec3("offset_m"), Rotation{m}}, half, *label});
    }
  }

  // Anything not consumed is a typo or an unsupported field.
  static const std::vector<std::string> known = {"sim", "scaling", "force", "drive.linear",
                                                 "drive.rotary", "rsr", "hc", "fluoro"};
  for (auto& [name, sec] : doc.sections) {
    const bool box = name.rfind("proximal.", 0) == 0 || name.rfind("distal.", 0) == 0;
    if (!box && std::find(known.begin(), known.end(), name) == known.end()) {
      throw ParseError(0, "[" + name + "]", "unknown section");
    }
    for (auto& [key, e] : sec) {
      if (!e.used) throw ParseError(e.line, "[" + name + "] " + key, "unknown field");
    }
  }

  check(s.dt > 0.0 && std::isfinite(s.dt), "[sim] dt_s must be positive");
  check(is_valid(s.scaling), "[scaling] max_v_m_s and max_w_rad_s must be positive");
  check(is_valid(s.force), "[force] requires k > 0, c >= 0, f_max > 0");
  check(is_valid(s.drives.linear), "[drive.linear] stiffness, damping, force_limit must be positive");
  check(is_valid(s.drives.rotary), "[drive.rotary] stiffness, damping, force_limit must be positive");
  check(is_valid(s.rsr), "[rsr] anchors must be non-collinear and actuator_min < actuator_max");
  check(is_valid(s.hc), "[hc] lengths must be positive");
  check(s.proximal.size() == 2, "scene needs exactly 2 proximal boxes");
  check(s.distal.size() == 2, "scene needs exactly 2 distal boxes");
  check(s.fluoro.width_px > 0 && s.fluoro.height_px > 0 && s.fluoro.pixel_size > 0.0,
        "[fluoro] image size and pixel size must be positive");
  for (double o : {s.fluoro.bone_opacity, s.fluoro.thigh_opacity}) {
    check(o >= 0.0 && o <= 1.0, "[fluoro] opacities must lie in [0, 1]");
  }
  if (s.fluoro.thigh) check(s.fluoro.thigh->radius > 0.0, "[fluoro] thigh_radius_m must be positive");

  const auto home_ik = rsr_inverse_kinematics(s.ring_home, s.rsr);
  check(home_ik.ok(), "[sim] ring home pose is not reachable (" +
                          std::string(to_string(home_ik.status)) + ")");
  const auto home_hc = hc_delta_inverse_kinematics(s.hc.workspace_center, s.hc);
  check(home_hc.ok(), "[hc] workspace center is outside the delta workspace");
  return s;
}

inline Scene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open scene file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scene(ss.str());
}

}  // namespace fracsim
