#pragma once

// Rigid-body primitives shared by the whole simulator.
//
// Canonical units are SI (m, rad, s, N). Conversion to the mm/deg units used
// in files and on the wire happens at the I/O boundary only.
//
// Euler convention: extrinsic X-Y-Z fixed angles, i.e.
//   R = Rz(gamma) * Ry(beta) * Rx(alpha)
// alpha about world X first, then beta about world Y, then gamma about world Z.

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fracsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline constexpr double rad_to_deg(double rad) { return rad * (180.0 / kPi); }
inline constexpr double m_to_mm(double m) { return m * 1000.0; }
inline constexpr double mm_to_m(double mm) { return mm / 1000.0; }

inline Vec3 mm_to_m(const Vec3& v) { return v / 1000.0; }
inline Vec3 m_to_mm(const Vec3& v) { return v * 1000.0; }

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

struct EulerAngles {
  double alpha = 0.0;  // about X
  double beta = 0.0;   // about Y
  double gamma = 0.0;  // about Z
};

/// Element of SO(3), stored as a unit quaternion. Every constructor and
/// composition renormalizes, so long chains stay orthonormal.
class Rotation {
 public:
  Rotation() = default;
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {
    canonicalize();
  }
  explicit Rotation(const Mat3& m) : q_(Eigen::Quaterniond(m).normalized()) {
    canonicalize();
  }

  static Rotation identity() { return Rotation{}; }

  static Rotation from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n == 0.0 || angle == 0.0) return Rotation{};
    return Rotation{Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis / n))};
  }

  /// Rotation vector (axis * angle), angle in [0, pi].
  static Rotation from_rotation_vector(const Vec3& rv) {
    return from_axis_angle(rv, rv.norm());
  }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const { return Rotation{q_.conjugate(), Raw{}}; }

  Vec3 rotate(const Vec3& v) const { return q_ * v; }

  /// Axis-angle of this rotation as a rotation vector; |result| in [0, pi].
  Vec3 log() const {
    const Eigen::AngleAxisd aa(q_);
    return aa.axis() * aa.angle();
  }

  /// Geodesic angle in [0, pi].
  double angle() const {
    const double vn = q_.vec().norm();
    return 2.0 * std::atan2(vn, std::abs(q_.w()));
  }

  friend Rotation operator*(const Rotation& a, const Rotation& b) {
    return Rotation{a.q_ * b.q_};
  }
  friend Vec3 operator*(const Rotation& r, const Vec3& v) { return r.rotate(v); }

  /// Geodesic distance between two rotations (radians).
  friend double angular_distance(const Rotation& a, const Rotation& b) {
    return (a.inverse() * b).angle();
  }

 private:
  struct Raw {};
  Rotation(const Eigen::Quaterniond& q, Raw) : q_(q) {}

  // q and -q encode the same rotation; keep w >= 0 so comparisons are stable.
  void canonicalize() {
    if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
  }

  Eigen::Quaterniond q_ = Eigen::Quaterniond::Identity();
};

inline Rotation rot_x(double a) { return Rotation::from_axis_angle(Vec3::UnitX(), a); }
inline Rotation rot_y(double a) { return Rotation::from_axis_angle(Vec3::UnitY(), a); }
inline Rotation rot_z(double a) { return Rotation::from_axis_angle(Vec3::UnitZ(), a); }

inline Rotation euler_to_rotation(const EulerAngles& e) {
  return rot_z(e.gamma) * rot_y(e.beta) * rot_x(e.alpha);
}

inline constexpr double kGimbalLockTolerance = 1e-9;

/// True when |beta| is within kGimbalLockTolerance of pi/2.
inline bool is_gimbal_locked(const Rotation& r) {
  const Mat3 m = r.matrix();
  const double cb = std::hypot(m(0, 0), m(1, 0));
  return std::abs(std::atan2(-m(2, 0), cb)) > kPi / 2.0 - kGimbalLockTolerance;
}

/// Inverse of euler_to_rotation away from gimbal lock. At gimbal lock the
/// canonical branch gamma = 0 is returned (see is_gimbal_locked).
inline EulerAngles rotation_to_euler(const Rotation& r) {
  const Mat3 m = r.matrix();
  const double cb = std::hypot(m(0, 0), m(1, 0));
  EulerAngles e;
  e.beta = std::atan2(-m(2, 0), cb);
  if (std::abs(e.beta) > kPi / 2.0 - kGimbalLockTolerance) {
    e.gamma = 0.0;
    if (e.beta > 0.0) {
      e.beta = kPi / 2.0;
      e.alpha = std::atan2(m(0, 1), m(1, 1));
    } else {
      e.beta = -kPi / 2.0;
      e.alpha = std::atan2(-m(0, 1), m(1, 1));
    }
  } else {
    e.alpha = std::atan2(m(2, 1), m(2, 2));
    e.gamma = std::atan2(m(1, 0), m(0, 0));
  }
  e.alpha = wrap_angle(e.alpha);
  e.gamma = wrap_angle(e.gamma);
  return e;
}

/// Rotation whose axis-angle is s times that of (r_prev^-1 * r_now).
inline Rotation scaled_rotation_increment(const Rotation& r_prev, const Rotation& r_now,
                                          double s) {
  const Rotation rel = r_prev.inverse() * r_now;
  if (s == 1.0) return rel;
  if (s == 0.0) return Rotation::identity();
  return Rotation::from_rotation_vector(s * rel.log());
}

struct Pose {
  Vec3 position = Vec3::Zero();
  Rotation orientation;

  static Pose identity() { return Pose{}; }

  Vec3 transform_point(const Vec3& p) const { return position + orientation * p; }
  Vec3 transform_vector(const Vec3& v) const { return orientation * v; }
};

inline Pose pose_compose(const Pose& a, const Pose& b) {
  return Pose{a.position + a.orientation * b.position, a.orientation * b.orientation};
}

inline Pose pose_inverse(const Pose& a) {
  const Rotation inv = a.orientation.inverse();
  return Pose{-(inv * a.position), inv};
}

inline Vec3 transform_point(const Pose& pose, const Vec3& p) { return pose.transform_point(p); }

struct Twist {
  Vec3 linear = Vec3::Zero();   // m/s
  Vec3 angular = Vec3::Zero();  // rad/s
};

/// Twist that carries `from` to `to` in dt seconds (angular part in the world frame).
inline Twist twist_between(const Pose& from, const Pose& to, double dt) {
  Twist t;
  t.linear = (to.position - from.position) / dt;
  t.angular = (to.orientation * from.orientation.inverse()).log() / dt;
  return t;
}

}  // namespace fracsim
