#pragma once

// Scripted operator that reacts to the rendered force, for closed-loop runs
// without a human in the loop.
//
// The operator pushes the leader along a fixed direction. Its speed drops
// linearly with the force it feels against the push and reverses once that
// force exceeds what it is willing to push with:
//
//   v = max_v * clamp(1 - F_resist / push_force, -1, 1)
//
// so it comes to rest where the rendered force balances push_force.

#include <algorithm>
#include <cmath>
#include <vector>

#include "fracsim/sim.hpp"

namespace fracsim {

struct PushOperatorConfig {
  Vec3 direction = Vec3::UnitZ();  // in the leader frame, normalized on use
  double speed = 0.05;             // free-space speed, m/s
  double push_force = 20.0;        // N
};

class PushOperator {
 public:
  explicit PushOperator(PushOperatorConfig cfg, Pose start = {})
      : cfg_(cfg), dir_(cfg.direction.normalized()), pose_(start) {}

  /// Next leader input given the force rendered on the previous tick.
  DeviceInput next(const Vec3& rendered_force, double dt) {
    const double resist = -rendered_force.dot(dir_);
    const double v = cfg_.speed * std::clamp(1.0 - resist / cfg_.push_force, -1.0, 1.0);
    pose_.position += v * dt * dir_;
    DeviceInput in;
    in.pose = pose_;
    return in;
  }

  /// Holds the leader still.
  DeviceInput hold() const {
    DeviceInput in;
    in.pose = pose_;
    return in;
  }

  const Pose& pose() const { return pose_; }

 private:
  PushOperatorConfig cfg_;
  Vec3 dir_;
  Pose pose_;
};

}  // namespace fracsim
