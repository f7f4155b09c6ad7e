#pragma once

#include <span>
#include <vector>

#include "reachkin/kinematics.hpp"

namespace reachkin::energetics {

/// Reach energy model e = a m T + b m d^i / T^(j-1). With m in kg, d in m and
/// T in s the result is read as joules.
struct EnergyParams {
  double a = 15.0;
  double b = 77.0;
  double i = 1.1;
  double j = 3.0;
  double mass = 2.6;  // effective limb mass, kg

  /// Throws DomainError unless a, b, mass > 0 and j > 1.
  void validate() const;
};

/// Throws DomainError for T <= 0 or d < 0.
double reach_energy(const EnergyParams& p, double distance, double duration);

/// Stationary point of reach_energy in T: (b (j-1) d^i / a)^(1/j).
/// Independent of mass. Throws DomainError for d <= 0.
double optimal_duration(const EnergyParams& p, double distance);

struct TaskEnergy {
  std::vector<double> per_reach;  // J
  double total = 0.0;             // J
};

/// Energy of each reach from its (path length, duration). Throws DomainError
/// when there are no segments.
TaskEnergy task_energy(std::span<const kinematics::ReachSegment> segments, const EnergyParams& p);

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;  // 0 when n < 2
  std::size_t n = 0;
};

MeanSem summarize(std::span<const double> values);

}  // namespace reachkin::energetics
