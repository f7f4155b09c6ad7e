#include "reachkin/quat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "reachkin/error.hpp"

namespace reachkin {

namespace {

double wrap_angle(double a) {
  // atan2 may return exactly -pi; the documented range is (-pi, pi].
  return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

}  // namespace

Quaternion Quaternion::from_components(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw InvalidRotationError("quaternion has zero or non-finite norm");
  }
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  bool flip = w < 0.0;
  if (w == 0.0) {
    flip = x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0)));
  }
  if (flip) {
    w = -w;
    x = -x;
    y = -y;
    z = -z;
  }
  // Avoid a signed zero in w so serialized fixtures stay byte-stable.
  if (w == 0.0) w = 0.0;
  return Quaternion(w, x, y, z, 0);
}

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw InvalidRotationError("rotation axis has zero norm");
  const double s = std::sin(0.5 * angle) / n;
  return from_components(std::cos(0.5 * angle), axis.x() * s, axis.y() * s, axis.z() * s);
}

Quaternion Quaternion::from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) {
    // First-order expansion keeps tiny rotations exact to rounding.
    return from_components(1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z());
  }
  return from_axis_angle(rv, angle);
}

Quaternion Quaternion::conjugate() const { return from_components(w_, -x_, -y_, -z_); }

Vec3 Quaternion::rotate(const Vec3& v) const {
  const Vec3 u(x_, y_, z_);
  const Vec3 t = 2.0 * u.cross(v);
  return v + w_ * t + u.cross(t);
}

Eigen::Matrix3d Quaternion::matrix() const {
  const double ww = w_ * w_, xx = x_ * x_, yy = y_ * y_, zz = z_ * z_;
  const double xy = x_ * y_, xz = x_ * z_, yz = y_ * z_;
  const double wx = w_ * x_, wy = w_ * y_, wz = w_ * z_;
  Eigen::Matrix3d m;
  m << ww + xx - yy - zz, 2.0 * (xy - wz), 2.0 * (xz + wy),
      2.0 * (xy + wz), ww - xx + yy - zz, 2.0 * (yz - wx),
      2.0 * (xz - wy), 2.0 * (yz + wx), ww - xx - yy + zz;
  return m;
}

double Quaternion::angle() const {
  const double vn = std::sqrt(x_ * x_ + y_ * y_ + z_ * z_);
  return 2.0 * std::atan2(vn, w_);
}

Vec3 Quaternion::rotation_vector() const {
  const double vn = std::sqrt(x_ * x_ + y_ * y_ + z_ * z_);
  if (vn < 1e-12) return Vec3(2.0 * x_, 2.0 * y_, 2.0 * z_);
  const double a = 2.0 * std::atan2(vn, w_);
  return Vec3(x_, y_, z_) * (a / vn);
}

Quaternion normalize(double w, double x, double y, double z) {
  return Quaternion::from_components(w, x, y, z);
}

Quaternion multiply(const Quaternion& a, const Quaternion& b) {
  return Quaternion::from_components(
      a.w() * b.w() - a.x() * b.x() - a.y() * b.y() - a.z() * b.z(),
      a.w() * b.x() + a.x() * b.w() + a.y() * b.z() - a.z() * b.y(),
      a.w() * b.y() - a.x() * b.z() + a.y() * b.w() + a.z() * b.x(),
      a.w() * b.z() + a.x() * b.y() - a.y() * b.x() + a.z() * b.w());
}

Quaternion relative(const Quaternion& a, const Quaternion& b) {
  return multiply(a.conjugate(), b);
}

double dot(const Quaternion& a, const Quaternion& b) {
  return a.w() * b.w() + a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
}

double quat_dist(const Quaternion& a, const Quaternion& b) {
  const double dw = a.w() - b.w(), dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  const double sw = a.w() + b.w(), sx = a.x() + b.x(), sy = a.y() + b.y(), sz = a.z() + b.z();
  const double minus = dw * dw + dx * dx + dy * dy + dz * dz;
  const double plus = sw * sw + sx * sx + sy * sy + sz * sz;
  return std::sqrt(std::min(minus, plus));
}

double geodesic_dist(const Quaternion& a, const Quaternion& b) {
  // atan2 form is accurate for nearly equal rotations where acos is not.
  const double d = std::abs(dot(a, b));
  const double chord = quat_dist(a, b);  // |a -/+ b| = 2 sin(theta/4)
  return 4.0 * std::atan2(0.5 * chord, std::sqrt(std::max(0.0, 0.5 * (1.0 + d))));
}

Quaternion slerp(const Quaternion& a, const Quaternion& b, double t) {
  auto bc = b.components();
  double d = dot(a, b);
  if (d < 0.0) {
    d = -d;
    for (auto& c : bc) c = -c;
  }
  const auto ac = a.components();
  double wa, wb;
  if (d > 0.9995) {
    wa = 1.0 - t;
    wb = t;
  } else {
    const double theta = std::acos(std::min(1.0, d));
    const double s = std::sin(theta);
    wa = std::sin((1.0 - t) * theta) / s;
    wb = std::sin(t * theta) / s;
  }
  return Quaternion::from_components(wa * ac[0] + wb * bc[0], wa * ac[1] + wb * bc[1],
                                     wa * ac[2] + wb * bc[2], wa * ac[3] + wb * bc[3]);
}

Quaternion shortest_arc(const Vec3& from, const Vec3& to) {
  const Vec3 f = from.normalized();
  const Vec3 t = to.normalized();
  const double c = f.dot(t);
  if (c < -1.0 + 1e-12) {
    // Antipodal: any axis orthogonal to `from` works; pick a stable one.
    Vec3 axis = f.cross(Vec3::UnitX());
    if (axis.norm() < 1e-6) axis = f.cross(Vec3::UnitY());
    return Quaternion::from_axis_angle(axis, std::numbers::pi);
  }
  const Vec3 axis = f.cross(t);
  return Quaternion::from_components(1.0 + c, axis.x(), axis.y(), axis.z());
}

Quaternion rot_x(double angle) { return Quaternion::from_axis_angle(Vec3::UnitX(), angle); }
Quaternion rot_y(double angle) { return Quaternion::from_axis_angle(Vec3::UnitY(), angle); }
Quaternion rot_z(double angle) { return Quaternion::from_axis_angle(Vec3::UnitZ(), angle); }

EulerAngles to_euler(const Quaternion& q, EulerSequence seq) {
  const Eigen::Matrix3d r = q.matrix();
  EulerAngles e;
  e.sequence = seq;
  double a = 0.0, b = 0.0, c = 0.0;
  switch (seq) {
    case EulerSequence::ZXY: {
      // R = Rz(a) Rx(b) Ry(c); R(2,1) = sin b.
      b = std::asin(std::clamp(r(2, 1), -1.0, 1.0));
      if (std::abs(std::abs(b) - std::numbers::pi / 2) < kGimbalLockTolerance) {
        e.gimbal_lock = true;
        a = std::atan2(r(1, 0), r(0, 0));
      } else {
        a = std::atan2(-r(0, 1), r(1, 1));
        c = std::atan2(-r(2, 0), r(2, 2));
      }
      break;
    }
    case EulerSequence::ZYX: {
      // R = Rz(a) Ry(b) Rx(c); R(2,0) = -sin b.
      b = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
      if (std::abs(std::abs(b) - std::numbers::pi / 2) < kGimbalLockTolerance) {
        e.gimbal_lock = true;
        a = std::atan2(-r(0, 1), r(1, 1));
      } else {
        a = std::atan2(r(1, 0), r(0, 0));
        c = std::atan2(r(2, 1), r(2, 2));
      }
      break;
    }
  }
  e.angles = {wrap_angle(a), wrap_angle(b), wrap_angle(c)};
  return e;
}

Quaternion from_euler(const EulerAngles& e) {
  const auto& [a, b, c] = e.angles;
  switch (e.sequence) {
    case EulerSequence::ZXY:
      return rot_z(a) * rot_x(b) * rot_y(c);
    case EulerSequence::ZYX:
      return rot_z(a) * rot_y(b) * rot_x(c);
  }
  return Quaternion::identity();
}

}  // namespace reachkin
