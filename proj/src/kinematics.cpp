#include "reachkin/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "reachkin/error.hpp"

namespace reachkin::kinematics {

void ArmModel::validate() const {
  if (!(upper_length > 0.0) || !(forearm_length > 0.0)) {
    throw DomainError("arm segment lengths must be positive");
  }
}

Vec3 flexion_axis() { return Vec3(0.0, -1.0, 0.0); }

Quaternion rot_flexion(double angle) { return Quaternion::from_axis_angle(flexion_axis(), angle); }

JointState joint_angles(const Quaternion& chest, const Quaternion& upper, const Quaternion& forearm) {
  JointState js;
  js.shoulder = relative(chest, upper);
  js.gimbal_lock = to_euler(js.shoulder).gimbal_lock;

  // Swing-twist split of the elbow rotation about the hinge axis.
  const Quaternion rel = relative(upper, forearm);
  const Vec3 h = flexion_axis();
  const double along = rel.x() * h.x() + rel.y() * h.y() + rel.z() * h.z();
  double flexion = 0.0;
  Quaternion twist;
  if (std::abs(along) > 0.0 || rel.w() > 0.0) {
    flexion = 2.0 * std::atan2(along, rel.w());
    twist = Quaternion::from_axis_angle(h, flexion);
  }
  js.hinge_residual = multiply(rel, twist.conjugate()).angle();
  js.elbow_flexion = std::clamp(flexion, 0.0, std::numbers::pi);
  return js;
}

ChainPositions joint_positions(const ArmModel& model, const JointState& js) {
  struct Link {
    Quaternion rotation;  // relative to the previous link
    double length;
  };
  const std::array<Link, 2> chain{{{js.shoulder, model.upper_length},
                                   {rot_flexion(js.elbow_flexion), model.forearm_length}}};
  std::array<Vec3, 3> points;
  points[0] = model.shoulder_offset;
  Quaternion accumulated;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    accumulated = accumulated * chain[k].rotation;
    points[k + 1] = points[k] + accumulated.rotate(Vec3(0.0, 0.0, -chain[k].length));
  }
  return {points[0], points[1], points[2]};
}

Vec3 endpoint(const ArmModel& model, const JointState& js) { return joint_positions(model, js).hand; }

double endpoint_perturbation_bound(const ArmModel& model, double delta) {
  if (delta < 0.0) throw DomainError("perturbation angle must be non-negative");
  return 2.0 * (model.upper_length + model.forearm_length) * std::sin(0.5 * delta);
}

std::vector<double> endpoint_speed(std::span<const double> t, std::span<const Vec3> p) {
  const std::size_t n = p.size();
  std::vector<double> v(n, 0.0);
  if (n < 2) return v;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k + 1 == n ? n - 1 : k + 1;
    v[k] = (p[b] - p[a]).norm() / (t[b] - t[a]);
  }
  return v;
}

std::vector<ReachSegment> segment_reaches(std::span<const double> t, std::span<const Vec3> p,
                                          const SegmentOptions& options) {
  const std::size_t n = p.size();
  if (t.size() != n) throw DataError("endpoint trace and timestamps differ in length");
  if (n < 3) throw DomainError("reach segmentation needs at least 3 samples");
  for (std::size_t k = 1; k < n; ++k) {
    if (!(t[k] > t[k - 1])) throw OrderingError("endpoint timestamps not strictly increasing", k);
  }

  const std::vector<double> speed = endpoint_speed(t, p);
  std::vector<bool> claimed(n, false);
  std::vector<ReachSegment> out;

  while (true) {
    std::size_t seed = n;
    for (std::size_t k = 0; k < n; ++k) {
      if (!claimed[k] && (seed == n || speed[k] > speed[seed])) seed = k;
    }
    if (seed == n || speed[seed] < options.min_peak_speed) break;

    const double peak = speed[seed];
    const double core = options.threshold_fraction * peak;
    const double floor = 0.01 * peak;
    std::size_t lo = seed, hi = seed;
    while (lo > 0 && !claimed[lo - 1] && speed[lo - 1] >= core) --lo;
    while (hi + 1 < n && !claimed[hi + 1] && speed[hi + 1] >= core) ++hi;
    while (lo > 0 && !claimed[lo - 1] && speed[lo] > floor && speed[lo - 1] < speed[lo]) --lo;
    while (hi + 1 < n && !claimed[hi + 1] && speed[hi] > floor && speed[hi + 1] < speed[hi]) ++hi;
    for (std::size_t k = lo; k <= hi; ++k) claimed[k] = true;

    ReachSegment seg;
    seg.start = lo;
    seg.end = hi;
    seg.duration = t[hi] - t[lo];
    for (std::size_t k = lo; k < hi; ++k) seg.path_length += (p[k + 1] - p[k]).norm();
    seg.net_displacement = (p[hi] - p[lo]).norm();
    if (seg.duration < options.min_duration || seg.path_length < options.min_path_length) continue;
    seg.trace.assign(p.begin() + static_cast<std::ptrdiff_t>(lo),
                     p.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    out.push_back(std::move(seg));
  }
  std::sort(out.begin(), out.end(),
            [](const ReachSegment& a, const ReachSegment& b) { return a.start < b.start; });
  return out;
}

DepthStats depth_stats(std::span<const ReachSegment> segments, double target_depth) {
  if (segments.empty()) throw DomainError("depth statistics need at least one reach");
  DepthStats s;
  s.target_depth = target_depth;
  s.count = segments.size();
  for (const auto& seg : segments) s.mean += seg.net_displacement;
  s.mean /= static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (const auto& seg : segments) ss += (seg.net_displacement - s.mean) * (seg.net_displacement - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  s.error = std::abs(s.mean - target_depth);
  return s;
}

}  // namespace reachkin::kinematics
