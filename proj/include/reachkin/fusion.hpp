#pragma once

#include <array>
#include <optional>
#include <span>

#include "reachkin/quat.hpp"
#include "reachkin/series.hpp"

namespace reachkin::fusion {

/// One raw 9-axis sample. Gyro in rad/s (sensor frame), accel in g, mag a
/// normalized field vector when present.
struct ImuFrame {
  double timestamp = 0.0;  // seconds
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::UnitZ();
  std::optional<Vec3> mag;
};

inline constexpr double kDefaultBeta = 0.1;
/// Step used for the very first frame of a stream, which has no predecessor.
inline constexpr double kDefaultFirstStep = 0.05;
inline constexpr double kMaxStep = 1.0;

/// Orientation is sensor-to-world: world = q ⊗ v_sensor ⊗ q*.
struct FilterState {
  Quaternion orientation;
  double beta = kDefaultBeta;
  std::optional<double> last_timestamp;
  std::size_t skipped_corrections = 0;
  bool last_correction_skipped = false;
};

using Vec4 = std::array<double, 4>;

/// Objective f(q) = R(q)^T d - s for a world reference d and its sensor
/// measurement s. The polynomial form is evaluated as-is on a raw
/// (not necessarily unit) 4-vector, so it can be finite-differenced.
std::array<double, 3> objective(const Vec4& q, const Vec3& reference, const Vec3& measured);

/// Gradient of ½|f(q)|² with respect to the raw 4-vector: J(q)^T f(q).
/// Gravity is always included (reference +z, measured = unit accel); when
/// `mag` is given the Earth-field term is added with the horizontal/vertical
/// reference derived from the current estimate.
Vec4 corrective_gradient(const Vec4& q, const Vec3& accel, const std::optional<Vec3>& mag);

/// One predictor + corrector step. dt comes from timestamps; the first frame of
/// a stream uses `first_step`. Zero accel skips the correction and flags the
/// state. Throws OrderingError for a non-increasing timestamp and DomainError
/// for a gap above kMaxStep.
FilterState madgwick_step(const FilterState& state, const ImuFrame& frame,
                          double first_step = kDefaultFirstStep);

/// Level orientation with zero yaw whose predicted gravity matches `accel`.
Quaternion tilt_from_accel(const Vec3& accel);

/// Full orientation from gravity and the magnetic field: world x is the
/// horizontal field direction, as in the magnetometer correction. Falls back to
/// tilt_from_accel when the field is parallel to gravity.
Quaternion orientation_from_accel_mag(const Vec3& accel, const Vec3& mag);

struct FuseOptions {
  double beta = kDefaultBeta;
  std::optional<Quaternion> initial;  // defaults to the first frame's accel (and mag)
  double first_step = kDefaultFirstStep;
};

/// One orientation per frame. Throws OrderingError naming the offending index.
QuaternionSeries fuse_series(std::span<const ImuFrame> frames, const FuseOptions& options = {});

}  // namespace reachkin::fusion
