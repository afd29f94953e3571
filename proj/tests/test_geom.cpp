#include <gtest/gtest.h>

#include <random>

#include "fracsim/geom.hpp"

using namespace fracsim;

namespace {

// Elementary rotation matrices written out by hand, independent of Eigen's
// AngleAxis, as the reference for the extrinsic XYZ convention.
Mat3 mx(double a) {
  Mat3 m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}
Mat3 my(double a) {
  Mat3 m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}
Mat3 mz(double a) {
  Mat3 m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

}  // namespace

TEST(Geom, UnitConversions) {
  EXPECT_DOUBLE_EQ(deg_to_rad(180.0), kPi);
  EXPECT_DOUBLE_EQ(rad_to_deg(kPi / 2), 90.0);
  EXPECT_DOUBLE_EQ(m_to_mm(0.005), 5.0);
  EXPECT_DOUBLE_EQ(mm_to_m(250.0), 0.25);
}

TEST(Geom, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_NEAR(wrap_angle(-kPi), kPi, 1e-15);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(0.25 + 6 * kPi), 0.25, 1e-12);
}

TEST(Geom, EulerMatchesHandWrittenMatrices) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int i = 0; i < 200; ++i) {
    const EulerAngles e{u(rng), u(rng) / 2, u(rng)};
    const Mat3 expected = mz(e.gamma) * my(e.beta) * mx(e.alpha);
    EXPECT_LT((euler_to_rotation(e).matrix() - expected).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Geom, EulerRoundTripAwayFromGimbalLock) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-kPi + 1e-6, kPi);
  std::uniform_real_distribution<double> b(-kPi / 2 + 1e-3, kPi / 2 - 1e-3);
  for (int i = 0; i < 1000; ++i) {
    const EulerAngles e{u(rng), b(rng), u(rng)};
    const EulerAngles back = rotation_to_euler(euler_to_rotation(e));
    EXPECT_NEAR(back.alpha, e.alpha, 1e-9);
    EXPECT_NEAR(back.beta, e.beta, 1e-9);
    EXPECT_NEAR(back.gamma, e.gamma, 1e-9);
  }
}

TEST(Geom, GimbalLockReturnsCanonicalBranch) {
  for (double beta : {kPi / 2, -kPi / 2}) {
    const Rotation r = euler_to_rotation({0.4, beta, 0.3});
    EXPECT_TRUE(is_gimbal_locked(r));
    const EulerAngles e = rotation_to_euler(r);
    EXPECT_EQ(e.gamma, 0.0);
    EXPECT_DOUBLE_EQ(e.beta, beta);
    // Same rotation, even though the split between alpha and gamma changed.
    EXPECT_LT(angular_distance(euler_to_rotation(e), r), 1e-12);
  }
  EXPECT_FALSE(is_gimbal_locked(euler_to_rotation({0.0, kPi / 2 - 1e-6, 0.0})));
}

TEST(Geom, QuaternionCanonicalSign) {
  const Rotation r{Eigen::Quaterniond(-0.5, 0.5, 0.5, 0.5)};
  EXPECT_GE(r.quaternion().w(), 0.0);
  EXPECT_LT(angular_distance(r, Rotation{Eigen::Quaterniond(0.5, -0.5, -0.5, -0.5)}), 1e-15);
}

TEST(Geom, LogExpRoundTrip) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> a(0.0, kPi - 1e-6);
  for (int i = 0; i < 500; ++i) {
    const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 rv = a(rng) * axis;
    EXPECT_LT((Rotation::from_rotation_vector(rv).log() - rv).norm(), 1e-12);
  }
}

TEST(Geom, ScaledIncrementEndpoints) {
  const Rotation a = euler_to_rotation({0.1, -0.2, 0.3});
  const Rotation b = euler_to_rotation({0.15, -0.1, 0.2});
  const Rotation rel = a.inverse() * b;
  const Rotation one = scaled_rotation_increment(a, b, 1.0);
  EXPECT_EQ(one.quaternion().coeffs(), rel.quaternion().coeffs());
  EXPECT_EQ(scaled_rotation_increment(a, b, 0.0).angle(), 0.0);
  const Rotation half = scaled_rotation_increment(a, b, 0.5);
  EXPECT_NEAR(half.angle(), 0.5 * rel.angle(), 1e-14);
  EXPECT_LT((half.log().normalized() - rel.log().normalized()).norm(), 1e-12);
}

TEST(Geom, PoseComposeAndInverse) {
  const Pose a{Vec3(0.1, -0.2, 0.3), euler_to_rotation({0.3, 0.2, -0.1})};
  const Pose b{Vec3(-0.05, 0.02, 0.4), euler_to_rotation({-0.7, 0.1, 1.1})};
  const Vec3 p(0.01, 0.02, 0.03);
  EXPECT_LT((pose_compose(a, b).transform_point(p) - a.transform_point(b.transform_point(p))).norm(),
            1e-15);
  const Pose id = pose_compose(a, pose_inverse(a));
  EXPECT_LT(id.position.norm(), 1e-15);
  EXPECT_LT(id.orientation.angle(), 1e-15);
}

TEST(Geom, TwistBetweenRecoversConstantRates) {
  const double dt = 0.001;
  const Vec3 w(0.2, -0.1, 0.4);
  const Pose from{Vec3(0, 0, 0), euler_to_rotation({0.5, 0.1, -0.3})};
  const Pose to{Vec3(1e-5, -2e-5, 0), Rotation::from_rotation_vector(w * dt) * from.orientation};
  const Twist t = twist_between(from, to, dt);
  EXPECT_LT((t.linear - Vec3(0.01, -0.02, 0)).norm(), 1e-12);
  EXPECT_LT((t.angular - w).norm(), 1e-9);
}
