#pragma once

// Leader-to-follower incremental motion mapping with velocity clamping.

#include "fracsim/geom.hpp"

namespace fracsim {

struct ScalingConfig {
  double max_v = 0.05;  // m/s
  double max_w = 0.5;   // rad/s
};

inline bool is_valid(const ScalingConfig& c) { return c.max_v > 0.0 && c.max_w > 0.0; }

struct ScaleFactor {
  double s_lin = 1.0;
  double s_ang = 1.0;
};

/// Per-component clamp: a speed above its maximum is scaled down to the
/// maximum, anything at or below passes through with factor 1.
inline ScaleFactor compute_scale(const Twist& twist, const ScalingConfig& cfg) {
  ScaleFactor s;
  const double v = twist.linear.norm();
  const double w = twist.angular.norm();
  if (v > cfg.max_v) s.s_lin = cfg.max_v / v;
  if (w > cfg.max_w) s.s_ang = cfg.max_w / w;
  return s;
}

struct TeleopState {
  Pose hc_prev;
  Pose rsr_prev;
  bool engaged = true;
};

/// New follower target: previous target plus the scaled leader increment.
/// The rotational increment is the leader's body-frame relative rotation,
/// scaled in axis-angle space and applied in the follower's body frame.
inline Pose map_increment(const TeleopState& state, const Pose& hc_now, const ScaleFactor& s) {
  Pose out;
  out.position = state.rsr_prev.position + s.s_lin * (hc_now.position - state.hc_prev.position);
  // A still leader must leave the follower target bit-for-bit unchanged.
  if (hc_now.orientation.quaternion().coeffs() == state.hc_prev.orientation.quaternion().coeffs()) {
    out.orientation = state.rsr_prev.orientation;
  } else {
    out.orientation = state.rsr_prev.orientation *
                      scaled_rotation_increment(state.hc_prev.orientation, hc_now.orientation,
                                                s.s_ang);
  }
  return out;
}

struct TeleopTick {
  TeleopState state;
  Pose rsr_target;
  ScaleFactor scale;
};

/// One control tick. While disengaged only the leader reference advances, so
/// re-engaging never produces a jump.
inline TeleopTick teleop_tick(const TeleopState& state, const Pose& hc_now, const Twist& hc_twist,
                              const ScalingConfig& cfg) {
  TeleopTick t;
  t.state = state;
  if (!state.engaged) {
    t.state.hc_prev = hc_now;
    t.rsr_target = state.rsr_prev;
    return t;
  }
  t.scale = compute_scale(hc_twist, cfg);
  t.rsr_target = map_increment(state, hc_now, t.scale);
  t.state.hc_prev = hc_now;
  t.state.rsr_prev = t.rsr_target;
  return t;
}

}  // namespace fracsim
