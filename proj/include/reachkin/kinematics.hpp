#pragma once

#include <array>
#include <span>
#include <vector>

#include "reachkin/quat.hpp"

namespace reachkin::kinematics {

/// Chest frame: x forward, y left, z up. In the rest pose the arm hangs
/// along -z with the elbow straight.
struct ArmModel {
  double upper_length = 0.30;    // shoulder to elbow, m
  double forearm_length = 0.25;  // elbow to hand endpoint, m
  Vec3 shoulder_offset = Vec3::Zero();

  /// Throws DomainError unless both lengths are positive.
  void validate() const;
};

/// Elbow hinge axis in the upper-arm frame. Positive flexion carries the
/// forearm from -z towards +x (right-hand rotation about -y).
Vec3 flexion_axis();
Quaternion rot_flexion(double angle);

/// The six controllable degrees of freedom.
struct JointState {
  Quaternion shoulder;        // 3 DOF, upper arm relative to chest
  double elbow_flexion = 0.0; // rad, [0, pi]
  double wrist_rotation = 0.0;// rad, pronation positive
  double hand_aperture = 0.0; // 0 closed .. 1 open

  bool gimbal_lock = false;    // shoulder Euler decomposition is degenerate
  double hinge_residual = 0.0; // rad of elbow rotation off the hinge axis
};

/// Shoulder = relative(chest, upper); elbow = hinge twist of
/// relative(upper, forearm), clamped to [0, pi]. Wrist and aperture stay zero;
/// they are driven by the EMG decoder.
JointState joint_angles(const Quaternion& chest, const Quaternion& upper, const Quaternion& forearm);

/// Joint trajectory of one trial, timestamps in seconds.
struct JointSeries {
  std::vector<double> t;
  std::vector<JointState> states;

  std::size_t size() const { return states.size(); }
  bool empty() const { return states.empty(); }
};

struct ChainPositions {
  Vec3 shoulder;
  Vec3 elbow;
  Vec3 hand;
};

/// Compounds segment rotations down the chain: shoulder offset, then the
/// shoulder rotation over the upper-arm vector, then shoulder∘elbow over the
/// forearm vector.
ChainPositions joint_positions(const ArmModel& model, const JointState& js);
Vec3 endpoint(const ArmModel& model, const JointState& js);

/// Analytic bound 2 (L_u + L_f) sin(delta / 2) on endpoint displacement
/// under a single-joint rotation of delta radians.
double endpoint_perturbation_bound(const ArmModel& model, double delta);

struct ReachSegment {
  std::size_t start = 0;  // inclusive sample indices
  std::size_t end = 0;
  double duration = 0.0;          // T, s
  double path_length = 0.0;       // d, m
  double net_displacement = 0.0;  // |p_end - p_start|, m
  std::vector<Vec3> trace;
};

struct SegmentOptions {
  double threshold_fraction = 0.05;  // of each segment's own peak speed
  double min_duration = 0.150;       // s
  double min_path_length = 0.02;     // m
  double min_peak_speed = 0.02;      // m/s; slower motion is treated as static
};

/// Endpoint speed per sample (central differences, one-sided at the ends).
std::vector<double> endpoint_speed(std::span<const double> t, std::span<const Vec3> p);

/// Finds reaches by repeatedly seeding at the fastest unclaimed sample, growing
/// the run while speed stays above threshold_fraction of that peak, then
/// extending each boundary down the falling speed flank to its valley.
/// Needs >= 3 samples with strictly increasing timestamps.
std::vector<ReachSegment> segment_reaches(std::span<const double> t, std::span<const Vec3> p,
                                          const SegmentOptions& options = {});

struct DepthStats {
  double target_depth = 0.0;  // d_AR, m
  double mean = 0.0;          // mu_phy, m
  double stddev = 0.0;        // sigma_phy (n - 1), m
  double error = 0.0;         // |mu_phy - d_AR|, m
  std::size_t count = 0;
};

/// Over segment net displacements. Throws DomainError on empty input.
DepthStats depth_stats(std::span<const ReachSegment> segments, double target_depth);

}  // namespace reachkin::kinematics
