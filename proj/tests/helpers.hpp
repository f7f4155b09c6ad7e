#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "reachkin/quat.hpp"
#include "reachkin/series.hpp"

namespace th {

inline constexpr double kDeg = std::numbers::pi / 180.0;

inline reachkin::Quaternion random_quat(std::mt19937_64& rng) {
  return reachkin::Quaternion::from_array(oracle::random_unit(rng));
}

inline reachkin::QuaternionSeries series_of(const std::vector<oracle::Q4>& v, double rate = 20.0,
                                            const char* label = "") {
  reachkin::QuaternionSeries s;
  s.label = label;
  for (std::size_t k = 0; k < v.size(); ++k) {
    s.push_back(static_cast<double>(k) / rate, reachkin::Quaternion::from_array(v[k]));
  }
  return s;
}

/// Same rotation, either sign.
inline bool same_rotation(const reachkin::Quaternion& a, const reachkin::Quaternion& b, double tol = 1e-12) {
  return reachkin::quat_dist(a, b) <= tol;
}

}  // namespace th
