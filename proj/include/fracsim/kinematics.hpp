#pragma once

// Kinematics of the follower parallel robot (three arms, each a universal
// joint with an actuated first axis, a prismatic actuator, and a spherical
// joint on the moving ring) and of the leader haptic device (delta stage plus
// a three-axis serial wrist).

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fracsim/geom.hpp"

namespace fracsim {

enum class KinStatus { Ok, Unreachable, Singular, NoConvergence, AmbiguousBranch };

inline std::string_view to_string(KinStatus s) {
  switch (s) {
    case KinStatus::Ok: return "ok";
    case KinStatus::Unreachable: return "unreachable";
    case KinStatus::Singular: return "singular";
    case KinStatus::NoConvergence: return "no_convergence";
    case KinStatus::AmbiguousBranch: return "ambiguous_branch";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Follower robot

struct RsrGeometry {
  std::array<Vec3, 3> fixed_anchors;   // fixed-ring frame (= world)
  std::array<Vec3, 3> moving_anchors;  // moving-ring body frame
  std::array<Vec3, 3> rotary_axes;     // first universal-joint axis per arm, unit
  double actuator_min = 0.05;
  double actuator_max = 0.35;

  /// Ring radii and anchor layout are engineering placeholders, not hardware data.
  static RsrGeometry make_symmetric(double fixed_radius, double moving_radius,
                                    double moving_offset_rad) {
    RsrGeometry g;
    for (int i = 0; i < 3; ++i) {
      const double phi = deg_to_rad(90.0 + 120.0 * i);
      const double psi = phi + moving_offset_rad;
      g.fixed_anchors[i] = Vec3(fixed_radius * std::cos(phi), fixed_radius * std::sin(phi), 0.0);
      g.moving_anchors[i] = Vec3(moving_radius * std::cos(psi), moving_radius * std::sin(psi), 0.0);
      g.rotary_axes[i] = Vec3(-std::sin(phi), std::cos(phi), 0.0);
    }
    return g;
  }

  static RsrGeometry default_geometry() {
    return make_symmetric(0.125, 0.100, deg_to_rad(60.0));
  }
};

struct RsrJointState {
  std::array<double, 3> d{};      // actuator lengths, m
  std::array<double, 3> theta{};  // active universal-joint angles, rad
};

// In-plane basis of arm i: e1 is the ring normal with the rotary axis removed,
// e2 = u x e1. theta is measured from e1 toward e2 about u.
struct ArmFrame {
  Vec3 u, e1, e2;
};

inline ArmFrame arm_frame(const Vec3& rotary_axis) {
  const Vec3 u = rotary_axis.normalized();
  Vec3 ref = Vec3::UnitZ();
  if (std::abs(u.dot(ref)) > 0.9) ref = Vec3::UnitX();
  const Vec3 e1 = (ref - ref.dot(u) * u).normalized();
  return {u, e1, u.cross(e1)};
}

inline bool is_valid(const RsrGeometry& g) {
  auto non_collinear = [](const std::array<Vec3, 3>& p) {
    return (p[1] - p[0]).cross(p[2] - p[0]).norm() > 1e-9;
  };
  if (!(g.actuator_min < g.actuator_max) || g.actuator_min < 0.0) return false;
  if (!non_collinear(g.fixed_anchors) || !non_collinear(g.moving_anchors)) return false;
  for (const auto& u : g.rotary_axes) {
    if (!(u.norm() > 0.0) || !u.allFinite()) return false;
  }
  return true;
}

struct RsrIkResult {
  RsrJointState joints;
  KinStatus status = KinStatus::Ok;
  int arm = -1;  // offending arm when status != Ok
  bool ok() const { return status == KinStatus::Ok; }
};

inline Vec3 leg_vector(const Pose& pose, const RsrGeometry& g, int i) {
  return pose.position + pose.orientation * g.moving_anchors[i] - g.fixed_anchors[i];
}

inline RsrIkResult rsr_inverse_kinematics(const Pose& pose, const RsrGeometry& g) {
  RsrIkResult r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 l = leg_vector(pose, g, i);
    const double len = l.norm();
    r.joints.d[i] = len;
    const ArmFrame f = arm_frame(g.rotary_axes[i]);
    const double c1 = l.dot(f.e1);
    const double c2 = l.dot(f.e2);
    r.joints.theta[i] = std::atan2(c2, c1);
    if (r.status != KinStatus::Ok) continue;
    if (len < g.actuator_min || len > g.actuator_max) {
      r.status = KinStatus::Unreachable;
      r.arm = i;
    } else if (std::hypot(c1, c2) <= 1e-9 * len) {
      r.status = KinStatus::Singular;
      r.arm = i;
    }
  }
  return r;
}

struct RsrFkResult {
  Pose pose;
  KinStatus status = KinStatus::Ok;
  int iterations = 0;
  double residual = 0.0;
  bool ok() const { return status == KinStatus::Ok; }
};

struct FkOptions {
  int max_iterations = 100;
  double tolerance = 1e-10;
  double polish_below = 1e-14;
  double max_condition = 1e12;
};

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Length and plane residuals per arm: |l_i| - d_i, and l_i . n_i where n_i is
/// the normal of the plane spanned by the rotary axis and the commanded leg
/// direction.
inline Vec6 rsr_residual(const Pose& pose, const RsrJointState& j, const RsrGeometry& g,
                         Mat6* jacobian = nullptr) {
  Vec6 r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 q = pose.orientation * g.moving_anchors[i];
    const Vec3 l = pose.position + q - g.fixed_anchors[i];
    const ArmFrame f = arm_frame(g.rotary_axes[i]);
    const Vec3 n = -std::sin(j.theta[i]) * f.e1 + std::cos(j.theta[i]) * f.e2;
    const double len = l.norm();
    r[2 * i] = len - j.d[i];
    r[2 * i + 1] = l.dot(n);
    if (jacobian) {
      const Vec3 gl = l / len;
      jacobian->row(2 * i) << gl.transpose(), q.cross(gl).transpose();
      jacobian->row(2 * i + 1) << n.transpose(), q.cross(n).transpose();
    }
  }
  return r;
}

/// Newton solve for the ring pose given all six active joint values, started
/// from `guess`. The solution branch is the one whose basin contains the guess.
inline RsrFkResult rsr_forward_kinematics(const RsrJointState& joints, const RsrGeometry& g,
                                          const Pose& guess, const FkOptions& opt = {}) {
  RsrFkResult out;
  Pose x = guess;
  Mat6 jac;
  bool polished = false;
  for (int it = 0;; ++it) {
    const Vec6 r = rsr_residual(x, joints, g, &jac);
    out.residual = r.cwiseAbs().maxCoeff();
    out.iterations = it;
    if (!std::isfinite(out.residual)) {
      out.status = KinStatus::NoConvergence;
      break;
    }
    // Below tolerance, one extra quadratic step drives the pose error to
    // rounding level unless the residual is already there.
    if (out.residual < opt.tolerance && (polished || out.residual < opt.polish_below)) {
      out.status = KinStatus::Ok;
      break;
    }
    if (out.residual < opt.tolerance) polished = true;
    if (it >= opt.max_iterations) {
      out.status = KinStatus::NoConvergence;
      break;
    }
    const Eigen::JacobiSVD<Mat6> svd(jac, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv[5] <= 0.0 || sv[0] / sv[5] > opt.max_condition) {
      out.status = KinStatus::AmbiguousBranch;
      break;
    }
    const Vec6 step = svd.solve(-r);
    x.position += step.head<3>();
    x.orientation = Rotation::from_rotation_vector(step.tail<3>()) * x.orientation;
  }
  out.pose = x;
  return out;
}

// ---------------------------------------------------------------------------
// Leader haptic device

struct HcGeometry {
  double base_radius = 0.060;      // shoulder joints from the device axis, m
  double effector_radius = 0.025;  // forearm attachment on the effector, m
  double upper_arm = 0.100;        // m
  double forearm = 0.160;          // m
  Vec3 workspace_center{0.0, 0.0, -0.150};  // device origin in the delta base frame
  // Wrist joints map onto the Euler angles alpha, beta, gamma in this order.
  std::array<int, 3> wrist_axis_order{0, 1, 2};
};

inline bool is_valid(const HcGeometry& g) {
  return g.base_radius > 0.0 && g.effector_radius > 0.0 && g.upper_arm > 0.0 &&
         g.forearm > 0.0 && g.workspace_center.allFinite();
}

struct HcJointState {
  std::array<double, 6> theta{};  // 3 delta shoulders + 3 wrist, rad
  double grip = 0.0;              // [0, 1], passed through
};

inline double delta_arm_angle(int arm) { return deg_to_rad(120.0 * arm); }

struct DeltaIkResult {
  std::array<double, 3> theta{};
  KinStatus status = KinStatus::Ok;
  int arm = -1;
  bool ok() const { return status == KinStatus::Ok; }
};

/// Shoulder angles (positive = arm swings down) placing the effector at
/// `position` in the delta base frame. Elbow-out branch.
inline DeltaIkResult hc_delta_inverse_kinematics(const Vec3& position, const HcGeometry& g) {
  DeltaIkResult out;
  for (int k = 0; k < 3; ++k) {
    const double phi = delta_arm_angle(k);
    const double xr = position.x() * std::cos(phi) + position.y() * std::sin(phi);
    const double yr = -position.x() * std::sin(phi) + position.y() * std::cos(phi);
    const double z = position.z();
    const double dx = xr + g.effector_radius - g.base_radius;
    const double p = -2.0 * g.upper_arm * dx;
    const double q = 2.0 * g.upper_arm * z;
    const double rhs = g.forearm * g.forearm - g.upper_arm * g.upper_arm - dx * dx - yr * yr -
                       z * z;
    const double rho = std::hypot(p, q);
    if (rho == 0.0 || std::abs(rhs) > rho) {
      out.status = KinStatus::Unreachable;
      out.arm = k;
      return out;
    }
    const double base = std::atan2(q, p);
    const double spread = std::acos(rhs / rho);
    const double t1 = wrap_angle(base + spread);
    const double t2 = wrap_angle(base - spread);
    out.theta[k] = std::cos(t1) >= std::cos(t2) ? t1 : t2;
  }
  return out;
}

/// Elbow position of arm k in the delta base frame.
inline Vec3 delta_elbow(int k, double theta, const HcGeometry& g) {
  const double phi = delta_arm_angle(k);
  const double radial = g.base_radius + g.upper_arm * std::cos(theta);
  return {radial * std::cos(phi), radial * std::sin(phi), -g.upper_arm * std::sin(theta)};
}

/// Effector position from the three shoulder angles by intersecting the three
/// forearm spheres (lower intersection).
inline std::optional<Vec3> hc_delta_forward_kinematics(const std::array<double, 3>& theta,
                                                       const HcGeometry& g) {
  std::array<Vec3, 3> c;
  for (int k = 0; k < 3; ++k) {
    const double phi = delta_arm_angle(k);
    c[k] = delta_elbow(k, theta[k], g) -
           g.effector_radius * Vec3(std::cos(phi), std::sin(phi), 0.0);
  }
  const double r = g.forearm;
  const Vec3 d21 = c[1] - c[0];
  const double d = d21.norm();
  if (d == 0.0) return std::nullopt;
  const Vec3 ex = d21 / d;
  const Vec3 d31 = c[2] - c[0];
  const double i = ex.dot(d31);
  Vec3 ey = d31 - i * ex;
  const double ey_n = ey.norm();
  if (ey_n == 0.0) return std::nullopt;
  ey /= ey_n;
  const Vec3 ez = ex.cross(ey);
  const double j = ey.dot(d31);
  const double x = d / 2.0;
  const double y = (i * i + j * j) / (2.0 * j) - (i / j) * x;
  const double z2 = r * r - x * x - y * y;
  if (z2 < 0.0) return std::nullopt;
  const double z = std::sqrt(z2);
  const Vec3 a = c[0] + x * ex + y * ey + z * ez;
  const Vec3 b = c[0] + x * ex + y * ey - z * ez;
  return a.z() < b.z() ? a : b;
}

struct WristAngles {
  std::array<double, 3> theta{};
  bool gimbal_lock = false;
};

/// Wrist joint angles realizing `orientation`, per the shared Euler convention.
inline WristAngles hc_wrist_angles(const Rotation& orientation,
                                   const std::array<int, 3>& axis_order = {0, 1, 2}) {
  const EulerAngles e = rotation_to_euler(orientation);
  const std::array<double, 3> abg{e.alpha, e.beta, e.gamma};
  WristAngles w;
  for (int k = 0; k < 3; ++k) w.theta[k] = abg[axis_order[k]];
  w.gimbal_lock = is_gimbal_locked(orientation);
  return w;
}

/// Full device joint state from a device pose expressed relative to the
/// workspace center.
struct HcIkResult {
  HcJointState joints;
  KinStatus status = KinStatus::Ok;
  bool gimbal_lock = false;
};

inline HcIkResult hc_inverse_kinematics(const Pose& device_pose, double grip,
                                        const HcGeometry& g) {
  HcIkResult r;
  const auto delta = hc_delta_inverse_kinematics(g.workspace_center + device_pose.position, g);
  r.status = delta.status;
  const auto wrist = hc_wrist_angles(device_pose.orientation, g.wrist_axis_order);
  for (int k = 0; k < 3; ++k) {
    r.joints.theta[k] = delta.theta[k];
    r.joints.theta[3 + k] = wrist.theta[k];
  }
  r.joints.grip = std::clamp(grip, 0.0, 1.0);
  r.gimbal_lock = wrist.gimbal_lock;
  return r;
}

// ---------------------------------------------------------------------------
// Link/joint graphs

enum class JointType { Revolute, Prismatic, Universal, Spherical };

inline std::string_view to_string(JointType t) {
  switch (t) {
    case JointType::Revolute: return "revolute";
    case JointType::Prismatic: return "prismatic";
    case JointType::Universal: return "universal";
    case JointType::Spherical: return "spherical";
  }
  return "unknown";
}

struct Link {
  std::string name;
};

struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  std::string parent;
  std::string child;
  Pose local_frame;
  bool active = false;
};

enum class ModelKind { Follower, Leader };

struct KinematicModel {
  ModelKind kind = ModelKind::Follower;
  std::vector<Link> links;
  std::vector<Joint> joints;

  const Joint* find_joint(std::string_view name) const {
    for (const auto& j : joints) {
      if (j.name == name) return &j;
    }
    return nullptr;
  }
  bool has_link(std::string_view name) const {
    return std::any_of(links.begin(), links.end(), [&](const Link& l) { return l.name == name; });
  }
};

// Follower: L_RSR1 fixed ring carrying the rotary actuators, per arm
// L_RSR2_i (universal cross), L_RSR3_i (lower arm), L_RSR4_i (actuator upper
// part), and the shared moving ring L_RSR5. Per arm: J_RSR.A_i active and
// J_RSR.B_i passive universal axes, J_RSR.C_i prismatic, J_RSR.D_i spherical.
inline KinematicModel default_rsr_model(const RsrGeometry& g = RsrGeometry::default_geometry()) {
  KinematicModel m;
  m.kind = ModelKind::Follower;
  m.links.push_back({"L_RSR1"});
  m.links.push_back({"L_RSR5"});
  for (int i = 1; i <= 3; ++i) {
    const std::string s = std::to_string(i);
    m.links.push_back({"L_RSR2_" + s});
    m.links.push_back({"L_RSR3_" + s});
    m.links.push_back({"L_RSR4_" + s});
    const Vec3& a = g.fixed_anchors[i - 1];
    const Vec3& b = g.moving_anchors[i - 1];
    m.joints.push_back({"J_RSR.A_" + s, JointType::Revolute, "L_RSR1", "L_RSR2_" + s,
                        Pose{a, Rotation{}}, true});
    m.joints.push_back({"J_RSR.B_" + s, JointType::Revolute, "L_RSR2_" + s, "L_RSR3_" + s,
                        Pose{}, false});
    m.joints.push_back({"J_RSR.C_" + s, JointType::Prismatic, "L_RSR3_" + s, "L_RSR4_" + s,
                        Pose{}, true});
    m.joints.push_back({"J_RSR.D_" + s, JointType::Spherical, "L_RSR4_" + s, "L_RSR5",
                        Pose{b, Rotation{}}, false});
  }
  return m;
}

// Leader: ground -> per arm L_HC1_i (upper arm, J_HC.A_i active), L_HC2_i
// (elbow bar, J_HC.B_i), parallelogram rods L_HC3_i / L_HC4_i (J_HC.C_i_a/b),
// effector bar L_HC5_i (J_HC.D_i_a/b), effector L_HC6 (J_HC.E_i). Wrist
// L_HC6 -> L_HC7 -> L_HC8 -> L_HC9 through J_HC.F, J_HC.G, J_HC.H.
inline KinematicModel default_hc_model() {
  KinematicModel m;
  m.kind = ModelKind::Leader;
  m.links.push_back({"ground"});
  m.links.push_back({"L_HC6"});
  for (int i = 1; i <= 3; ++i) {
    const std::string s = std::to_string(i);
    for (int l = 1; l <= 5; ++l) m.links.push_back({"L_HC" + std::to_string(l) + "_" + s});
    m.joints.push_back({"J_HC.A_" + s, JointType::Revolute, "ground", "L_HC1_" + s, {}, true});
    m.joints.push_back({"J_HC.B_" + s, JointType::Revolute, "L_HC1_" + s, "L_HC2_" + s, {}, false});
    m.joints.push_back({"J_HC.C_" + s + "_a", JointType::Revolute, "L_HC2_" + s, "L_HC3_" + s, {}, false});
    m.joints.push_back({"J_HC.C_" + s + "_b", JointType::Revolute, "L_HC2_" + s, "L_HC4_" + s, {}, false});
    m.joints.push_back({"J_HC.D_" + s + "_a", JointType::Revolute, "L_HC3_" + s, "L_HC5_" + s, {}, false});
    m.joints.push_back({"J_HC.D_" + s + "_b", JointType::Revolute, "L_HC4_" + s, "L_HC5_" + s, {}, false});
    m.joints.push_back({"J_HC.E_" + s, JointType::Revolute, "L_HC5_" + s, "L_HC6", {}, false});
  }
  m.links.push_back({"L_HC7"});
  m.links.push_back({"L_HC8"});
  m.links.push_back({"L_HC9"});
  m.joints.push_back({"J_HC.F", JointType::Revolute, "L_HC6", "L_HC7", {}, true});
  m.joints.push_back({"J_HC.G", JointType::Revolute, "L_HC7", "L_HC8", {}, true});
  m.joints.push_back({"J_HC.H", JointType::Revolute, "L_HC8", "L_HC9", {}, true});
  return m;
}

struct ModelDiagnostics {
  bool valid = true;
  int arms = 0;                 // complete arms detected
  int loops = 0;                // independent closed loops in the graph
  bool delta_loop_closed = false;
  bool wrist_complete = false;
  std::vector<std::string> messages;

  void fail(std::string msg) {
    valid = false;
    messages.push_back(std::move(msg));
  }
};

namespace detail {

struct LinkUnion {
  std::map<std::string, std::string> parent;
  std::string find(const std::string& x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    if (it->second == x) return x;
    const std::string root = find(it->second);
    parent[x] = root;
    return root;
  }
  // Returns false when a and b were already connected (the edge closes a loop).
  bool unite(const std::string& a, const std::string& b) {
    const std::string ra = find(a);
    const std::string rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
    return true;
  }
};

struct ExpectedJoint {
  std::string name;
  JointType type;
  std::string parent;
  std::string child;
};

inline bool check_joint(const KinematicModel& m, const ExpectedJoint& e, ModelDiagnostics& d) {
  const Joint* j = m.find_joint(e.name);
  if (!j) {
    d.fail("missing joint " + e.name);
    return false;
  }
  bool ok = true;
  if (j->type != e.type) {
    d.fail("joint " + e.name + " has type " + std::string(to_string(j->type)) + ", expected " +
           std::string(to_string(e.type)));
    ok = false;
  }
  if (j->parent != e.parent || j->child != e.child) {
    d.fail("joint " + e.name + " connects " + j->parent + " -> " + j->child + ", expected " +
           e.parent + " -> " + e.child);
    ok = false;
  }
  return ok;
}

}  // namespace detail

/// Checks the link/joint pattern of a follower or leader model and reports
/// every missing or mismatched element by name.
inline ModelDiagnostics validate_model(const KinematicModel& m) {
  ModelDiagnostics d;

  for (const auto& j : m.joints) {
    if (!m.has_link(j.parent)) d.fail("joint " + j.name + " references unknown link " + j.parent);
    if (!m.has_link(j.child)) d.fail("joint " + j.name + " references unknown link " + j.child);
  }

  detail::LinkUnion uf;
  for (const auto& j : m.joints) {
    if (!uf.unite(j.parent, j.child)) ++d.loops;
  }

  std::vector<std::string> expected_links;
  if (m.kind == ModelKind::Follower) {
    expected_links = {"L_RSR1", "L_RSR5"};
    for (int i = 1; i <= 3; ++i) {
      const std::string s = std::to_string(i);
      for (int l = 2; l <= 4; ++l) expected_links.push_back("L_RSR" + std::to_string(l) + "_" + s);
      bool arm_ok = true;
      arm_ok &= detail::check_joint(
          m, {"J_RSR.A_" + s, JointType::Revolute, "L_RSR1", "L_RSR2_" + s}, d);
      arm_ok &= detail::check_joint(
          m, {"J_RSR.B_" + s, JointType::Revolute, "L_RSR2_" + s, "L_RSR3_" + s}, d);
      arm_ok &= detail::check_joint(
          m, {"J_RSR.C_" + s, JointType::Prismatic, "L_RSR3_" + s, "L_RSR4_" + s}, d);
      arm_ok &= detail::check_joint(
          m, {"J_RSR.D_" + s, JointType::Spherical, "L_RSR4_" + s, "L_RSR5"}, d);
      if (arm_ok) ++d.arms;
    }
    if (d.loops < 2) d.fail("follower graph has " + std::to_string(d.loops) +
                            " closed loops, expected at least 2");
  } else {
    expected_links = {"ground", "L_HC6", "L_HC7", "L_HC8", "L_HC9"};
    for (int i = 1; i <= 3; ++i) {
      const std::string s = std::to_string(i);
      for (int l = 1; l <= 5; ++l) expected_links.push_back("L_HC" + std::to_string(l) + "_" + s);
      bool arm_ok = true;
      arm_ok &= detail::check_joint(m, {"J_HC.A_" + s, JointType::Revolute, "ground", "L_HC1_" + s}, d);
      arm_ok &= detail::check_joint(m, {"J_HC.B_" + s, JointType::Revolute, "L_HC1_" + s, "L_HC2_" + s}, d);
      arm_ok &= detail::check_joint(m, {"J_HC.C_" + s + "_a", JointType::Revolute, "L_HC2_" + s, "L_HC3_" + s}, d);
      arm_ok &= detail::check_joint(m, {"J_HC.C_" + s + "_b", JointType::Revolute, "L_HC2_" + s, "L_HC4_" + s}, d);
      arm_ok &= detail::check_joint(m, {"J_HC.D_" + s + "_a", JointType::Revolute, "L_HC3_" + s, "L_HC5_" + s}, d);
      arm_ok &= detail::check_joint(m, {"J_HC.D_" + s + "_b", JointType::Revolute, "L_HC4_" + s, "L_HC5_" + s}, d);
      arm_ok &= detail::check_joint(m, {"J_HC.E_" + s, JointType::Revolute, "L_HC5_" + s, "L_HC6"}, d);
      if (arm_ok) ++d.arms;
    }
    bool wrist = true;
    wrist &= detail::check_joint(m, {"J_HC.F", JointType::Revolute, "L_HC6", "L_HC7"}, d);
    wrist &= detail::check_joint(m, {"J_HC.G", JointType::Revolute, "L_HC7", "L_HC8"}, d);
    wrist &= detail::check_joint(m, {"J_HC.H", JointType::Revolute, "L_HC8", "L_HC9"}, d);
    d.wrist_complete = wrist;

    // Loops confined to the delta stage (links L_HC1..6 and ground).
    detail::LinkUnion delta_uf;
    int delta_loops = 0;
    for (const auto& j : m.joints) {
      const bool in_delta = j.name.rfind("J_HC.", 0) == 0 && j.name.size() > 5 &&
                            j.name[5] >= 'A' && j.name[5] <= 'E';
      if (in_delta && !delta_uf.unite(j.parent, j.child)) ++delta_loops;
    }
    d.delta_loop_closed = delta_loops >= 2;
    if (!d.delta_loop_closed) d.fail("delta stage does not close its loops on L_HC1-6");
  }

  for (const auto& l : expected_links) {
    if (!m.has_link(l)) d.fail("missing link " + l);
  }
  if (d.arms != 3) d.fail("detected " + std::to_string(d.arms) + " complete arms, expected 3");
  return d;
}

}  // namespace fracsim
