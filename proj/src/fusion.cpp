#include "reachkin/fusion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "reachkin/error.hpp"

namespace reachkin::fusion {

namespace {

// Below this gradient norm the estimate is treated as already consistent with
// the measurement; normalizing a rounding-level gradient would otherwise
// inject a full beta*dt step in an arbitrary direction.
constexpr double kGradientFloor = 1e-9;

Vec4 to_vec4(const Quaternion& q) { return q.components(); }

void add_term(Vec4& grad, const Vec4& q, const Vec3& d, const Vec3& s) {
  const auto [q0, q1, q2, q3] = q;
  const auto f = objective(q, d, s);
  const double dx = d.x(), dy = d.y(), dz = d.z();
  // Rows of the Jacobian of f with respect to (q0, q1, q2, q3).
  const double j[3][4] = {
      {2 * dy * q3 - 2 * dz * q2, 2 * dy * q2 + 2 * dz * q3, -4 * dx * q2 + 2 * dy * q1 - 2 * dz * q0,
       -4 * dx * q3 + 2 * dy * q0 + 2 * dz * q1},
      {-2 * dx * q3 + 2 * dz * q1, 2 * dx * q2 - 4 * dy * q1 + 2 * dz * q0, 2 * dx * q1 + 2 * dz * q3,
       -2 * dx * q0 - 4 * dy * q3 + 2 * dz * q2},
      {2 * dx * q2 - 2 * dy * q1, 2 * dx * q3 - 2 * dy * q0 - 4 * dz * q1,
       2 * dx * q0 + 2 * dy * q3 - 4 * dz * q2, 2 * dx * q1 + 2 * dy * q2},
  };
  for (int c = 0; c < 4; ++c) {
    grad[c] += j[0][c] * f[0] + j[1][c] * f[1] + j[2][c] * f[2];
  }
}

}  // namespace

std::array<double, 3> objective(const Vec4& q, const Vec3& d, const Vec3& s) {
  const auto [q0, q1, q2, q3] = q;
  const double dx = d.x(), dy = d.y(), dz = d.z();
  return {
      2 * dx * (0.5 - q2 * q2 - q3 * q3) + 2 * dy * (q0 * q3 + q1 * q2) + 2 * dz * (q1 * q3 - q0 * q2) - s.x(),
      2 * dx * (q1 * q2 - q0 * q3) + 2 * dy * (0.5 - q1 * q1 - q3 * q3) + 2 * dz * (q0 * q1 + q2 * q3) - s.y(),
      2 * dx * (q0 * q2 + q1 * q3) + 2 * dy * (q2 * q3 - q0 * q1) + 2 * dz * (0.5 - q1 * q1 - q2 * q2) - s.z(),
  };
}

Vec4 corrective_gradient(const Vec4& q, const Vec3& accel, const std::optional<Vec3>& mag) {
  Vec4 grad{0.0, 0.0, 0.0, 0.0};
  add_term(grad, q, Vec3::UnitZ(), accel.normalized());
  if (mag && mag->norm() > 0.0) {
    const Vec3 m = mag->normalized();
    // World-frame field direction under the current estimate, with its
    // horizontal part folded onto +x.
    const Quaternion est = Quaternion::from_array(q);
    const Vec3 h = est.rotate(m);
    const Vec3 b(std::hypot(h.x(), h.y()), 0.0, h.z());
    add_term(grad, q, b, m);
  }
  return grad;
}

FilterState madgwick_step(const FilterState& state, const ImuFrame& frame, double first_step) {
  if (state.beta < 0.0) throw DomainError("filter gain beta must be non-negative");
  double dt = first_step;
  if (state.last_timestamp) {
    dt = frame.timestamp - *state.last_timestamp;
    if (!(dt > 0.0)) throw OrderingError("IMU frame timestamp not after previous frame", 0);
    if (dt > kMaxStep) {
      throw DomainError("IMU frame gap of " + std::to_string(dt) + " s exceeds " +
                        std::to_string(kMaxStep) + " s");
    }
  }

  const auto [q0, q1, q2, q3] = to_vec4(state.orientation);
  const double gx = frame.gyro.x(), gy = frame.gyro.y(), gz = frame.gyro.z();
  // q_dot = ½ q ⊗ (0, ω)
  Vec4 rate{0.5 * (-q1 * gx - q2 * gy - q3 * gz), 0.5 * (q0 * gx + q2 * gz - q3 * gy),
            0.5 * (q0 * gy - q1 * gz + q3 * gx), 0.5 * (q0 * gz + q1 * gy - q2 * gx)};

  FilterState next = state;
  next.last_correction_skipped = false;
  if (state.beta > 0.0) {
    if (frame.accel.norm() > 0.0) {
      const Vec4 grad = corrective_gradient({q0, q1, q2, q3}, frame.accel, frame.mag);
      const double gn = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2] +
                                  grad[3] * grad[3]);
      if (gn > kGradientFloor) {
        for (int c = 0; c < 4; ++c) rate[c] -= state.beta * grad[c] / gn;
      }
    } else {
      next.last_correction_skipped = true;
      ++next.skipped_corrections;
    }
  }

  next.orientation = Quaternion::from_components(q0 + rate[0] * dt, q1 + rate[1] * dt,
                                                 q2 + rate[2] * dt, q3 + rate[3] * dt);
  next.last_timestamp = frame.timestamp;
  return next;
}

Quaternion tilt_from_accel(const Vec3& accel) {
  if (!(accel.norm() > 0.0)) return Quaternion::identity();
  const Vec3 a = accel.normalized();
  // Predicted gravity for Rx(b) Ry(c) is (-sin c cos b, sin b, cos c cos b).
  const double b = std::asin(std::clamp(a.y(), -1.0, 1.0));
  const double c = std::atan2(-a.x(), a.z());
  return rot_x(b) * rot_y(c);
}

Quaternion orientation_from_accel_mag(const Vec3& accel, const Vec3& mag) {
  if (!(accel.norm() > 0.0)) return Quaternion::identity();
  const Vec3 z = accel.normalized();
  Vec3 x = mag - mag.dot(z) * z;
  if (!(x.norm() > 1e-9)) return tilt_from_accel(accel);
  x.normalize();
  const Vec3 y = z.cross(x);
  // Rows are the world axes seen in the sensor frame, i.e. R^T has them as columns.
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  const Eigen::Quaterniond e(r);
  return Quaternion::from_components(e.w(), e.x(), e.y(), e.z());
}

QuaternionSeries fuse_series(std::span<const ImuFrame> frames, const FuseOptions& options) {
  QuaternionSeries out;
  if (frames.empty()) return out;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    if (!(frames[k].timestamp > frames[k - 1].timestamp)) {
      throw OrderingError("IMU frames not time-ordered", k);
    }
  }
  FilterState state;
  state.beta = options.beta;
  const auto& f0 = frames.front();
  if (options.initial) {
    state.orientation = *options.initial;
  } else {
    state.orientation = f0.mag ? orientation_from_accel_mag(f0.accel, *f0.mag) : tilt_from_accel(f0.accel);
  }
  out.t.reserve(frames.size());
  out.q.reserve(frames.size());
  for (const auto& f : frames) {
    state = madgwick_step(state, f, options.first_step);
    out.push_back(f.timestamp, state.orientation);
  }
  return out;
}

}  // namespace reachkin::fusion
