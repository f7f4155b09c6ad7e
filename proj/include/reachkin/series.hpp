#pragma once

#include <string>
#include <vector>

#include "reachkin/quat.hpp"

namespace reachkin {

/// Timestamped orientation trajectory of one joint or segment.
/// Timestamps are seconds and strictly increasing.
struct QuaternionSeries {
  std::string label;
  std::vector<double> t;
  std::vector<Quaternion> q;

  std::size_t size() const { return q.size(); }
  bool empty() const { return q.empty(); }

  void push_back(double time, const Quaternion& value) {
    t.push_back(time);
    q.push_back(value);
  }
};

/// Throws OrderingError naming the first non-increasing timestamp, DataError
/// when the time and sample counts differ.
void validate(const QuaternionSeries& s);

/// Resamples onto t0, t0 + 1/rate, ... <= t_end by slerp. A single-sample
/// series is returned unchanged.
QuaternionSeries resample(const QuaternionSeries& s, double rate_hz);

}  // namespace reachkin
