#pragma once

// Fixed-timestep simulation of the teleoperated follower robot.
//
// Each tick: leader input -> follower target pose -> joint targets -> servo
// drives -> ring pose from the driven joints -> distal boxes -> contacts ->
// rendered force. The contact force is reported to the operator and does not
// act on the robot joints.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fracsim/force.hpp"
#include "fracsim/geom.hpp"
#include "fracsim/kinematics.hpp"
#include "fracsim/obb.hpp"
#include "fracsim/scene.hpp"
#include "fracsim/teleop.hpp"

namespace fracsim {

struct DriveStep {
  double value = 0.0;
  double rate = 0.0;
  double force = 0.0;
};

/// Spring-damper servo on a unit-inertia coordinate, semi-implicit Euler.
inline DriveStep drive_step(double current, double rate, double target, const DriveParams& p,
                            double dt) {
  const double raw = p.stiffness * (target - current) - p.damping * rate;
  const double f = std::clamp(raw, -p.force_limit, p.force_limit);
  const double new_rate = rate + f * dt;
  return {current + new_rate * dt, new_rate, f};
}

inline std::array<Obb, 2> attach_distal(const Pose& ring_pose, const std::vector<DistalBox>& boxes) {
  std::array<Obb, 2> out;
  for (std::size_t i = 0; i < 2 && i < boxes.size(); ++i) {
    out[i] = Obb::from_pose(pose_compose(ring_pose, boxes[i].offset), boxes[i].half_extents,
                            boxes[i].label);
  }
  return out;
}

struct DeviceInput {
  Pose pose;                   // device pose relative to its workspace center
  std::optional<Twist> twist;  // computed from the pose delta when absent
  bool engaged = true;
  double grip = 0.0;
};

/// Fault flags raised during one tick.
struct TickFaults {
  bool unreachable = false;       // IK failed; previous joint targets held
  bool kinematics_fault = false;  // FK failed; robot state frozen
  KinStatus ik_status = KinStatus::Ok;
  KinStatus fk_status = KinStatus::Ok;
};

struct SimState {
  std::uint64_t tick = 0;
  double time = 0.0;

  TeleopState teleop;
  Pose hc_pose;
  Twist hc_twist;
  HcJointState hc_joints;
  Pose rsr_target;

  RsrJointState joint_target;
  RsrJointState joint_actual;
  RsrJointState joint_rate;
  std::array<double, 6> drive_force{};

  Pose ring_pose;
  Vec3 ring_velocity = Vec3::Zero();
  std::array<Obb, 2> distal{};

  std::vector<ContactResult> contacts;
  ForceResult force;
  unsigned collision_mask = 0;

  TickFaults faults;
  int fk_iterations = 0;
  std::uint64_t unreachable_ticks = 0;
  std::uint64_t kinematics_faults = 0;
};

struct TrajectorySample {
  double t = 0.0;
  Pose hc;
  Pose rsr_target;
  Pose rsr_actual;
  RsrJointState joints;
  Vec3 f_global = Vec3::Zero();
  unsigned collide = 0;
};

inline TrajectorySample make_sample(const SimState& s) {
  return {s.time, s.hc_pose, s.rsr_target, s.ring_pose, s.joint_actual, s.force.f_global,
          s.collision_mask};
}

namespace sim_detail {

inline void evaluate_contacts(SimState& s, const Scene& scene) {
  s.distal = attach_distal(s.ring_pose, scene.distal);
  s.contacts = scene_contacts(scene.proximal, s.distal);
  s.collision_mask = collision_mask(s.contacts);
  s.force = evaluate_forces(s.contacts, s.ring_velocity, scene.force);
}

// Pushes a target ring pose out of contact by translating it along the
// accumulated contact normals. Used only in strict-constraint mode.
inline Pose project_out_of_collision(const Pose& target, const Scene& scene) {
  Pose p = target;
  for (int iter = 0; iter < 8; ++iter) {
    const auto distal = attach_distal(p, scene.distal);
    const auto contacts = scene_contacts(scene.proximal, distal);
    Vec3 push = Vec3::Zero();
    for (const auto& c : contacts) {
      if (c.colliding) push += c.depth * c.normal;
    }
    if (push.isZero(0.0)) break;
    p.position += push * (1.0 + 1e-9) + push.normalized() * 1e-12;
  }
  return p;
}

}  // namespace sim_detail

inline SimState make_initial_state(const Scene& scene, const Pose& device_pose = {}) {
  SimState s;
  s.teleop.hc_prev = device_pose;
  s.teleop.rsr_prev = scene.ring_home;
  s.hc_pose = device_pose;
  s.rsr_target = scene.ring_home;
  const auto ik = rsr_inverse_kinematics(scene.ring_home, scene.rsr);
  if (!ik.ok()) throw ValidationError("ring home pose is not reachable");
  s.joint_target = ik.joints;
  s.joint_actual = ik.joints;
  s.ring_pose = scene.ring_home;
  s.hc_joints = hc_inverse_kinematics(device_pose, 0.0, scene.hc).joints;
  sim_detail::evaluate_contacts(s, scene);
  return s;
}

/// Advances the simulation by one fixed timestep.
inline SimState step(const SimState& prev, const Scene& scene, const DeviceInput& input) {
  SimState s = prev;
  const double dt = scene.dt;
  s.faults = {};

  // (1) teleoperation
  s.hc_twist = input.twist ? *input.twist : twist_between(prev.hc_pose, input.pose, dt);
  s.hc_pose = input.pose;
  s.hc_joints = hc_inverse_kinematics(input.pose, input.grip, scene.hc).joints;
  TeleopState ts = prev.teleop;
  ts.engaged = input.engaged;
  auto tick = teleop_tick(ts, input.pose, s.hc_twist, scene.scaling);
  Pose target = tick.rsr_target;
  if (scene.strict_constraint && input.engaged) {
    target = sim_detail::project_out_of_collision(target, scene);
    tick.state.rsr_prev = target;
  }

  // (2) joint targets; an unreachable command holds the last valid target.
  const auto ik = rsr_inverse_kinematics(target, scene.rsr);
  if (ik.ok()) {
    s.teleop = tick.state;
    s.rsr_target = target;
    s.joint_target = ik.joints;
  } else {
    s.teleop = tick.state;
    s.teleop.rsr_prev = prev.rsr_target;
    s.rsr_target = prev.rsr_target;
    s.faults.unreachable = true;
    s.faults.ik_status = ik.status;
    ++s.unreachable_ticks;
  }

  // (3) servo drives
  for (int i = 0; i < 3; ++i) {
    const auto lin = drive_step(prev.joint_actual.d[i], prev.joint_rate.d[i], s.joint_target.d[i],
                                scene.drives.linear, dt);
    s.joint_actual.d[i] = lin.value;
    s.joint_rate.d[i] = lin.rate;
    s.drive_force[i] = lin.force;
    const auto rot = drive_step(prev.joint_actual.theta[i], prev.joint_rate.theta[i],
                                s.joint_target.theta[i], scene.drives.rotary, dt);
    s.joint_actual.theta[i] = rot.value;
    s.joint_rate.theta[i] = rot.rate;
    s.drive_force[3 + i] = rot.force;
  }

  // (4) ring pose from the driven joints, seeded with the previous pose
  const auto fk = rsr_forward_kinematics(s.joint_actual, scene.rsr, prev.ring_pose);
  s.fk_iterations = fk.iterations;
  if (fk.ok()) {
    s.ring_pose = fk.pose;
  } else {
    s.faults.kinematics_fault = true;
    s.faults.fk_status = fk.status;
    ++s.kinematics_faults;
    s.joint_actual = prev.joint_actual;
    s.joint_rate = RsrJointState{};
    s.drive_force = {};
    s.ring_pose = prev.ring_pose;
  }

  // (5)-(7) attachment, contacts, rendered force
  s.ring_velocity = (s.ring_pose.position - prev.ring_pose.position) / dt;
  sim_detail::evaluate_contacts(s, scene);

  ++s.tick;
  s.time = static_cast<double>(s.tick) * dt;
  return s;
}

/// Kinetic plus servo-spring energy of the six driven coordinates.
inline double drive_energy(const SimState& s, const Scene& scene) {
  double e = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double ed = s.joint_actual.d[i] - s.joint_target.d[i];
    const double et = s.joint_actual.theta[i] - s.joint_target.theta[i];
    e += 0.5 * s.joint_rate.d[i] * s.joint_rate.d[i] + 0.5 * scene.drives.linear.stiffness * ed * ed;
    e += 0.5 * s.joint_rate.theta[i] * s.joint_rate.theta[i] +
         0.5 * scene.drives.rotary.stiffness * et * et;
  }
  return e;
}

inline double max_penetration(const SimState& s) {
  double d = 0.0;
  for (const auto& c : s.contacts) d = std::max(d, c.depth);
  return d;
}

// ---------------------------------------------------------------------------
// Scripted runs

struct ScriptKeyframe {
  double t = 0.0;
  Pose pose;
  std::optional<Twist> twist;
  bool engaged = true;
  double grip = 0.0;
};

using Script = std::vector<ScriptKeyframe>;

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tick index of a keyframe time; throws if it is off the dt grid.
inline std::int64_t grid_index(double t, double dt) {
  const double k = t / dt;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-6 || r < 0.0) {
    throw ScriptError("script time " + std::to_string(t) + " is not on the dt grid");
  }
  return static_cast<std::int64_t>(r);
}

/// Device input for tick index k. Keyframes are held exactly on their own
/// tick and interpolated (lerp / slerp) in between.
class ScriptCursor {
 public:
  ScriptCursor(const Script& script, double dt) : script_(script) {
    ticks_.reserve(script.size());
    for (std::size_t i = 0; i < script.size(); ++i) {
      ticks_.push_back(grid_index(script[i].t, dt));
      if (i > 0 && ticks_[i] <= ticks_[i - 1]) {
        throw ScriptError("script times must be strictly increasing");
      }
    }
  }

  std::int64_t last_tick() const { return ticks_.empty() ? 0 : ticks_.back(); }

  DeviceInput at(std::int64_t k) {
    while (idx_ + 1 < ticks_.size() && ticks_[idx_ + 1] <= k) ++idx_;
    const ScriptKeyframe& a = script_[idx_];
    DeviceInput in;
    in.engaged = a.engaged;
    in.grip = a.grip;
    if (ticks_[idx_] == k || idx_ + 1 >= ticks_.size() || k < ticks_[idx_]) {
      in.pose = a.pose;
      if (ticks_[idx_] == k) in.twist = a.twist;
      return in;
    }
    const ScriptKeyframe& b = script_[idx_ + 1];
    const double u = static_cast<double>(k - ticks_[idx_]) /
                     static_cast<double>(ticks_[idx_ + 1] - ticks_[idx_]);
    in.pose.position = a.pose.position + u * (b.pose.position - a.pose.position);
    in.pose.orientation =
        Rotation{a.pose.orientation.quaternion().slerp(u, b.pose.orientation.quaternion())};
    return in;
  }

 private:
  const Script& script_;
  std::vector<std::int64_t> ticks_;
  std::size_t idx_ = 0;
};

struct RunResult {
  std::vector<TrajectorySample> samples;
  std::vector<int> fk_iterations;  // per tick
  std::uint64_t unreachable_ticks = 0;
  std::uint64_t kinematics_faults = 0;
  SimState final_state;

  std::uint64_t fault_count() const { return unreachable_ticks + kinematics_faults; }
};

/// Deterministic batch run: one sample per tick from dt up to the last
/// keyframe time.
inline RunResult run_script(const Scene& scene, const Script& script) {
  RunResult out;
  if (script.empty()) {
    out.final_state = make_initial_state(scene);
    return out;
  }
  ScriptCursor cursor(script, scene.dt);
  SimState s = make_initial_state(scene, script.front().pose);
  const std::int64_t n = cursor.last_tick();
  out.samples.reserve(static_cast<std::size_t>(n));
  out.fk_iterations.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 1; k <= n; ++k) {
    s = step(s, scene, cursor.at(k));
    out.samples.push_back(make_sample(s));
    out.fk_iterations.push_back(s.fk_iterations);
  }
  out.unreachable_ticks = s.unreachable_ticks;
  out.kinematics_faults = s.kinematics_faults;
  out.final_state = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// Tracking deviation

struct ErrorStats {
  double max = 0.0;
  double mean = 0.0;
  double rms = 0.0;
};

struct DeviationReport {
  ErrorStats translation_mm;
  ErrorStats rotation_deg;
  std::size_t samples = 0;
  // Per-tick series: translation error components (mm) and rotation error as a
  // rotation vector (deg), target -> actual.
  std::vector<Vec3> translation_series_mm;
  std::vector<Vec3> rotation_series_deg;
};

class EmptyLogError : public std::invalid_argument {
 public:
  EmptyLogError() : std::invalid_argument("deviation report needs at least one sample") {}
};

/// Follower tracking error: commanded target pose versus achieved ring pose.
inline DeviationReport deviation_report(const std::vector<TrajectorySample>& samples) {
  if (samples.empty()) throw EmptyLogError{};
  DeviationReport r;
  r.samples = samples.size();
  double st = 0.0, st2 = 0.0, sr = 0.0, sr2 = 0.0;
  for (const auto& s : samples) {
    const Vec3 dp = m_to_mm(s.rsr_actual.position - s.rsr_target.position);
    const Vec3 dr = (s.rsr_target.orientation.inverse() * s.rsr_actual.orientation).log();
    const double et = dp.norm();
    const double er = rad_to_deg(dr.norm());
    r.translation_series_mm.push_back(dp);
    r.rotation_series_deg.push_back(dr * (180.0 / kPi));
    r.translation_mm.max = std::max(r.translation_mm.max, et);
    r.rotation_deg.max = std::max(r.rotation_deg.max, er);
    st += et;
    st2 += et * et;
    sr += er;
    sr2 += er * er;
  }
  const double n = static_cast<double>(samples.size());
  r.translation_mm.mean = st / n;
  r.translation_mm.rms = std::sqrt(st2 / n);
  r.rotation_deg.mean = sr / n;
  r.rotation_deg.rms = std::sqrt(sr2 / n);
  return r;
}

}  // namespace fracsim
