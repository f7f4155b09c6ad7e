#include "reachkin/series.hpp"

#include <algorithm>
#include <cmath>

#include "reachkin/error.hpp"

namespace reachkin {

void validate(const QuaternionSeries& s) {
  if (s.t.size() != s.q.size()) {
    throw DataError("series '" + s.label + "' has " + std::to_string(s.t.size()) +
                    " timestamps but " + std::to_string(s.q.size()) + " samples");
  }
  for (std::size_t k = 1; k < s.t.size(); ++k) {
    if (!(s.t[k] > s.t[k - 1])) {
      throw OrderingError("series '" + s.label + "' timestamps not strictly increasing", k);
    }
  }
}

QuaternionSeries resample(const QuaternionSeries& s, double rate_hz) {
  if (!(rate_hz > 0.0)) throw DomainError("resample rate must be positive");
  validate(s);
  if (s.size() < 2) return s;

  QuaternionSeries out;
  out.label = s.label;
  const double t0 = s.t.front();
  const double span = s.t.back() - t0;
  const auto count = static_cast<std::size_t>(std::floor(span * rate_hz + 1e-9)) + 1;
  out.t.reserve(count);
  out.q.reserve(count);
  std::size_t k = 0;
  for (std::size_t n = 0; n < count; ++n) {
    const double t = t0 + static_cast<double>(n) / rate_hz;
    while (k + 2 < s.size() && s.t[k + 1] < t) ++k;
    const double a = s.t[k], b = s.t[k + 1];
    const double u = std::clamp((t - a) / (b - a), 0.0, 1.0);
    out.push_back(t, slerp(s.q[k], s.q[k + 1], u));
  }
  return out;
}

}  // namespace reachkin
