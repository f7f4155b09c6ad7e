#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace reachkin {

using Vec3 = Eigen::Vector3d;

/// Unit quaternion, stored w-first. Every instance is normalized and kept in
/// canonical sign (w > 0, or when w == 0 the first nonzero of x, y, z is
/// positive), so q and -q construct the same value.
class Quaternion {
 public:
  constexpr Quaternion() = default;

  /// Normalizes and canonicalizes. Throws InvalidRotationError on a zero or
  /// non-finite input.
  static Quaternion from_components(double w, double x, double y, double z);
  static Quaternion from_array(const std::array<double, 4>& c) {
    return from_components(c[0], c[1], c[2], c[3]);
  }
  static constexpr Quaternion identity() { return Quaternion(); }

  /// Right-handed rotation of `angle` radians about `axis` (need not be unit).
  static Quaternion from_axis_angle(const Vec3& axis, double angle);
  /// exp map: rotation vector (axis * angle) to quaternion.
  static Quaternion from_rotation_vector(const Vec3& rv);

  constexpr double w() const { return w_; }
  constexpr double x() const { return x_; }
  constexpr double y() const { return y_; }
  constexpr double z() const { return z_; }
  constexpr std::array<double, 4> components() const { return {w_, x_, y_, z_}; }

  Quaternion conjugate() const;
  Vec3 rotate(const Vec3& v) const;
  Eigen::Matrix3d matrix() const;
  /// Rotation angle in [0, pi].
  double angle() const;
  /// log map; the returned vector has norm angle() (in [0, pi]).
  Vec3 rotation_vector() const;

  friend bool operator==(const Quaternion&, const Quaternion&) = default;

 private:
  constexpr Quaternion(double w, double x, double y, double z, int)
      : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

Quaternion normalize(double w, double x, double y, double z);
inline Quaternion normalize(const std::array<double, 4>& c) {
  return normalize(c[0], c[1], c[2], c[3]);
}

/// Hamilton product a ⊗ b (apply b first, then a).
Quaternion multiply(const Quaternion& a, const Quaternion& b);
inline Quaternion operator*(const Quaternion& a, const Quaternion& b) { return multiply(a, b); }

/// a⁻¹ ⊗ b: the rotation of b expressed in the frame of a.
Quaternion relative(const Quaternion& a, const Quaternion& b);

/// Sign-invariant chordal distance min(|a - b|, |a + b|) over 4-vectors.
double quat_dist(const Quaternion& a, const Quaternion& b);

/// Geodesic rotation angle between a and b, in [0, pi].
double geodesic_dist(const Quaternion& a, const Quaternion& b);

/// 4-vector dot product.
double dot(const Quaternion& a, const Quaternion& b);

/// Shortest-path spherical interpolation, t in [0, 1].
Quaternion slerp(const Quaternion& a, const Quaternion& b, double t);

/// Rotation taking unit direction `from` onto unit direction `to` about their
/// common normal.
Quaternion shortest_arc(const Vec3& from, const Vec3& to);

Quaternion rot_x(double angle);
Quaternion rot_y(double angle);
Quaternion rot_z(double angle);

enum class EulerSequence {
  ZXY,  // intrinsic z, then x', then y''
  ZYX,  // intrinsic z, then y', then x''
};

struct EulerAngles {
  EulerSequence sequence = EulerSequence::ZXY;
  std::array<double, 3> angles{0.0, 0.0, 0.0};  // radians, each in (-pi, pi]
  bool gimbal_lock = false;
};

/// Middle-angle distance from ±pi/2 below which a decomposition is flagged.
inline constexpr double kGimbalLockTolerance = 1e-4;

/// Intrinsic decomposition. Near gimbal lock the third angle is set to zero
/// and the flag raised.
EulerAngles to_euler(const Quaternion& q, EulerSequence seq = EulerSequence::ZXY);
Quaternion from_euler(const EulerAngles& e);

}  // namespace reachkin
