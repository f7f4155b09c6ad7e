#include "reachkin/energetics.hpp"

#include <cmath>

#include "reachkin/error.hpp"

namespace reachkin::energetics {

void EnergyParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !(mass > 0.0)) throw DomainError("energy constants a, b and mass must be positive");
  if (!(j > 1.0)) throw DomainError("energy exponent j must exceed 1");
}

double reach_energy(const EnergyParams& p, double distance, double duration) {
  p.validate();
  if (!(duration > 0.0)) throw DomainError("reach duration must be positive");
  if (distance < 0.0) throw DomainError("reach distance must be non-negative");
  return p.a * p.mass * duration + p.b * p.mass * std::pow(distance, p.i) / std::pow(duration, p.j - 1.0);
}

double optimal_duration(const EnergyParams& p, double distance) {
  p.validate();
  if (!(distance > 0.0)) throw DomainError("optimal duration needs a positive reach distance");
  return std::pow(p.b * (p.j - 1.0) * std::pow(distance, p.i) / p.a, 1.0 / p.j);
}

TaskEnergy task_energy(std::span<const kinematics::ReachSegment> segments, const EnergyParams& p) {
  if (segments.empty()) throw DomainError("trial has no reach segments");
  TaskEnergy out;
  out.per_reach.reserve(segments.size());
  for (const auto& s : segments) {
    const double e = reach_energy(p, s.path_length, s.duration);
    out.per_reach.push_back(e);
    out.total += e;
  }
  return out;
}

MeanSem summarize(std::span<const double> values) {
  MeanSem s;
  s.n = values.size();
  if (s.n == 0) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sem = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

}  // namespace reachkin::energetics
