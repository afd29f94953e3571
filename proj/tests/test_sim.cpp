#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fracsim/operator.hpp"
#include "fracsim/sim.hpp"
#include "fracsim/trajectory_io.hpp"

using namespace fracsim;

namespace {

Scene default_scene() {
  return load_scene_file(std::string(FRACSIM_SOURCE_DIR) + "/scenes/femur_default.scene");
}

Script shipped_script(const std::string& name) {
  std::ifstream in(std::string(FRACSIM_SOURCE_DIR) + "/scripts/" + name);
  return read_script_csv(in);
}

ScriptKeyframe key(double t, const Vec3& p) {
  ScriptKeyframe k;
  k.t = t;
  k.pose.position = p;
  return k;
}

}  // namespace

TEST(Drive, CriticallyDampedStepMatchesClosedForm) {
  const double K = 5000.0;
  const double w = std::sqrt(K);
  const DriveParams p{K, 2.0 * w, 1e12};
  const double dt = 1e-6;
  const double tau = 1.0 / w;
  double x = 0.0, v = 0.0, prev = 0.0;
  const int n = static_cast<int>(std::round(7.0 * tau / dt));
  for (int i = 1; i <= n; ++i) {
    const auto s = drive_step(x, v, 1.0, p, dt);
    x = s.value;
    v = s.rate;
    ASSERT_GE(x, prev);
    ASSERT_LE(x, 1.0);
    prev = x;
    const double t = i * dt;
    const double expected = 1.0 - (1.0 + w * t) * std::exp(-w * t);
    ASSERT_NEAR(x, expected, 1e-3);
  }
  // (1 + 7) e^-7 < 1%.
  EXPECT_LT(1.0 - x, 0.01);
}

TEST(Drive, ForceLimitCapsAcceleration) {
  const DriveParams p{5000.0, 140.0, 200.0};
  const auto s = drive_step(0.0, 0.0, 1.0, p, 0.001);
  EXPECT_EQ(s.force, 200.0);
  EXPECT_DOUBLE_EQ(s.rate, 0.2);
  EXPECT_DOUBLE_EQ(s.value, 0.0002);
}

TEST(Sim, InitialStateIsAtRestAtHome) {
  const Scene sc = default_scene();
  const SimState s = make_initial_state(sc);
  EXPECT_LT((s.ring_pose.position - sc.ring_home.position).norm(), 1e-15);
  EXPECT_EQ(s.collision_mask, 0u);
  EXPECT_EQ(s.force.f_global, Vec3::Zero());
}

TEST(Sim, StillLeaderKeepsFollowerStill) {
  const Scene sc = default_scene();
  SimState s = make_initial_state(sc);
  for (int i = 0; i < 500; ++i) s = step(s, sc, DeviceInput{});
  EXPECT_LT((s.ring_pose.position - sc.ring_home.position).norm(), 1e-12);
  EXPECT_EQ(s.unreachable_ticks + s.kinematics_faults, 0u);
  EXPECT_NEAR(s.time, 0.5, 1e-12);
}

TEST(Sim, SlowLineTrackedWithServoLag) {
  // For a ramp input the servo settles to a constant delay of c/K.
  const Scene sc = default_scene();
  const double v = 0.01;
  const double lag_s = sc.drives.linear.damping / sc.drives.linear.stiffness;
  const Script script = {key(0.0, Vec3::Zero()), key(2.0, Vec3(0.6 * v * 2.0, 0.0, 0.8 * v * 2.0))};
  const RunResult r = run_script(sc, script);
  ASSERT_EQ(r.samples.size(), 2000u);
  EXPECT_EQ(r.fault_count(), 0u);
  const int lag_ticks = static_cast<int>(std::round(lag_s / sc.dt));
  double worst_delayed = 0.0, worst_raw = 0.0;
  for (std::size_t i = 500; i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    worst_raw = std::max(worst_raw, (s.rsr_actual.position - s.rsr_target.position).norm());
    const auto& delayed = r.samples[i - lag_ticks].rsr_target;
    worst_delayed = std::max(worst_delayed, (s.rsr_actual.position - delayed.position).norm());
  }
  EXPECT_LT(worst_raw, 1.2 * v * lag_s);
  EXPECT_LT(worst_delayed, 0.1 * v * lag_s);
}

TEST(Sim, UnreachableHoldsLastTarget) {
  const Scene sc = default_scene();
  const RunResult r = run_script(sc, shipped_script("unreachable.csv"));
  EXPECT_GT(r.unreachable_ticks, 0u);
  EXPECT_EQ(r.kinematics_faults, 0u);
  const auto ik = rsr_inverse_kinematics(r.samples.back().rsr_target, sc.rsr);
  EXPECT_TRUE(ik.ok());
  // Once unreachable, the target stops moving.
  SimState s = make_initial_state(sc);
  DeviceInput far;
  far.pose.position = Vec3(0.0, 0.0, 0.4);
  bool seen = false;
  for (int i = 0; i < 20000; ++i) {
    Pose p = s.teleop.hc_prev;
    p.position += (far.pose.position - p.position).normalized() * std::min(4e-5, (far.pose.position - p.position).norm());
    const Pose before = s.rsr_target;
    s = step(s, sc, DeviceInput{p, std::nullopt, true, 0.0});
    if (s.faults.unreachable) {
      EXPECT_EQ(s.rsr_target.position, before.position);
      seen = true;
    }
  }
  ASSERT_TRUE(seen);
  EXPECT_TRUE(rsr_inverse_kinematics(s.rsr_target, sc.rsr).ok());
}

TEST(Sim, RunScriptIsDeterministic) {
  const Scene sc = default_scene();
  const Script script = shipped_script("sinusoid_6dof.csv");
  std::ostringstream a, b;
  write_trajectory_csv(a, run_script(sc, script).samples);
  write_trajectory_csv(b, run_script(sc, script).samples);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_GT(a.str().size(), 100000u);
}

TEST(Sim, FkConvergesFastOnShippedScripts) {
  const Scene sc = default_scene();
  for (const char* name : {"sinusoid_6dof.csv", "adversarial_clamp.csv", "unreachable.csv"}) {
    const RunResult r = run_script(sc, shipped_script(name));
    std::size_t slow = 0;
    for (int it : r.fk_iterations) slow += it > 20 ? 1 : 0;
    EXPECT_LE(static_cast<double>(slow), 0.001 * r.fk_iterations.size()) << name;
    EXPECT_EQ(r.kinematics_faults, 0u) << name;
  }
}

TEST(ScriptCursor, HoldsKeyframesAndInterpolates) {
  Script script = {key(0.0, Vec3::Zero()), key(0.004, Vec3(0.004, 0, 0))};
  script[1].pose.orientation = rot_z(0.4);
  ScriptCursor c(script, 0.001);
  EXPECT_EQ(c.last_tick(), 4);
  EXPECT_EQ(c.at(0).pose.position, Vec3::Zero());
  const DeviceInput mid = c.at(2);
  EXPECT_NEAR(mid.pose.position.x(), 0.002, 1e-15);
  EXPECT_NEAR(angular_distance(mid.pose.orientation, rot_z(0.2)), 0.0, 1e-12);
  EXPECT_EQ(c.at(4).pose.position, Vec3(0.004, 0, 0));
  EXPECT_EQ(c.at(9).pose.position, Vec3(0.004, 0, 0));
}

TEST(ScriptCursor, RejectsBadTimes) {
  EXPECT_THROW(ScriptCursor(Script{key(0.0, Vec3::Zero()), key(0.0015, Vec3::Zero())}, 0.001),
               ScriptError);
  EXPECT_THROW(ScriptCursor(Script{key(0.002, Vec3::Zero()), key(0.001, Vec3::Zero())}, 0.001),
               ScriptError);
}

TEST(Deviation, MatchesHandComputedStatistics) {
  std::vector<TrajectorySample> s(2);
  s[0].rsr_actual.position = Vec3(0.003, 0.004, 0.0);  // 5 mm
  s[1].rsr_target.orientation = rot_x(deg_to_rad(1.0));
  s[1].rsr_actual.orientation = rot_x(deg_to_rad(3.0));  // 2 deg
  const DeviationReport r = deviation_report(s);
  EXPECT_EQ(r.samples, 2u);
  EXPECT_NEAR(r.translation_mm.max, 5.0, 1e-12);
  EXPECT_NEAR(r.translation_mm.mean, 2.5, 1e-12);
  EXPECT_NEAR(r.translation_mm.rms, std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(r.rotation_deg.max, 2.0, 1e-12);
  EXPECT_NEAR(r.rotation_deg.mean, 1.0, 1e-12);
  EXPECT_NEAR(r.rotation_series_deg[1].x(), 2.0, 1e-12);
  EXPECT_THROW(deviation_report({}), EmptyLogError);
}

TEST(Sim, ForceDoesNotActOnJoints) {
  // Identical commanded motion with and without bones gives identical joints.
  Scene with = default_scene();
  Scene without = with;
  without.proximal[0].center.z() += 5.0;
  without.proximal[1].center.z() += 5.0;
  const Script script = {key(0.0, Vec3::Zero()), key(1.0, Vec3(0, 0, 0.03))};
  const RunResult a = run_script(with, script);
  const RunResult b = run_script(without, script);
  EXPECT_GT(a.final_state.collision_mask, 0u);
  EXPECT_EQ(b.final_state.collision_mask, 0u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.final_state.joint_actual.d[i], b.final_state.joint_actual.d[i]);
}

TEST(Sim, PushAgainstBoneStaysBoundedWithoutTunneling) {
  const Scene sc = default_scene();
  SimState s = make_initial_state(sc);
  const double push = 20.0;
  PushOperator op({Vec3::UnitZ(), sc.scaling.max_v, push});
  const double bound = push / sc.force.k + 2.0 * sc.scaling.max_v * sc.dt;
  const double side0 = (s.distal[0].center - sc.proximal[0].center).z();
  for (int k = 0; k < 10000; ++k) {
    s = step(s, sc, op.next(s.force.f_global, sc.dt));
    ASSERT_LE(max_penetration(s), bound);
    const double side = (s.distal[0].center - sc.proximal[0].center).z();
    if (!s.contacts[0].colliding) {
      ASSERT_EQ(side > 0.0, side0 > 0.0);
    }
  }
  EXPECT_GT(max_penetration(s), 0.5 * push / sc.force.k);
  EXPECT_EQ(s.unreachable_ticks, 0u);
}

TEST(Sim, StrictConstraintKeepsTargetOutOfContact) {
  Scene sc = default_scene();
  sc.strict_constraint = true;
  const Script script = {key(0.0, Vec3::Zero()), key(1.0, Vec3(0, 0, 0.04))};
  const RunResult r = run_script(sc, script);
  const auto distal = attach_distal(r.final_state.rsr_target, sc.distal);
  for (const auto& c : scene_contacts(sc.proximal, distal)) EXPECT_FALSE(c.colliding);
}

TEST(Sim, DriveEnergyDecaysWhenInputStops) {
  const Scene sc = default_scene();
  SimState s = make_initial_state(sc);
  for (int i = 0; i < 3; ++i) {
    s.joint_actual.d[i] += 0.002 * (i + 1);
    s.joint_actual.theta[i] -= 0.01 * (i + 1);
  }
  double e = drive_energy(s, sc);
  ASSERT_GT(e, 0.0);
  for (int k = 0; k < 2000; ++k) {
    s = step(s, sc, DeviceInput{});
    const double next = drive_energy(s, sc);
    ASSERT_LE(next, e) << "tick " << k;
    e = next;
  }
  EXPECT_LT(e, 1e-12);
}
