#include <algorithm>
#include <cmath>

#include "reachkin/simd/kernels.hpp"

namespace reachkin::simd::scalar {

void chordal_distance_row(const double q[4], QuatColumns cols, std::span<double> out) {
  for (std::size_t k = 0; k < cols.size; ++k) {
    const double dw = q[0] - cols.w[k], dx = q[1] - cols.x[k];
    const double dy = q[2] - cols.y[k], dz = q[3] - cols.z[k];
    const double sw = q[0] + cols.w[k], sx = q[1] + cols.x[k];
    const double sy = q[2] + cols.y[k], sz = q[3] + cols.z[k];
    const double minus = ((dw * dw + dx * dx) + dy * dy) + dz * dz;
    const double plus = ((sw * sw + sx * sx) + sy * sy) + sz * sz;
    out[k] = std::sqrt(std::min(minus, plus));
  }
}

EmgChannelFeatures emg_channel_features(std::span<const double> x, double deadzone) {
  EmgChannelFeatures f;
  const std::size_t n = x.size();
  if (n == 0) return f;
  double sum_abs = 0.0;
  for (double v : x) sum_abs += std::abs(v);
  f.mav = sum_abs / static_cast<double>(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = x[i + 1] - x[i];
    f.wl += std::abs(d);
    if (x[i] * x[i + 1] < 0.0 && std::abs(d) >= deadzone) ++f.zc;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double back = x[i] - x[i - 1];
    const double fwd = x[i] - x[i + 1];
    if (back * fwd > 0.0 && (std::abs(back) >= deadzone || std::abs(fwd) >= deadzone)) ++f.ssc;
  }
  return f;
}

void finite_difference(std::span<const double> x, double dt, std::span<double> out) {
  for (std::size_t k = 0; k + 1 < x.size(); ++k) out[k] = (x[k + 1] - x[k]) / dt;
}

}  // namespace reachkin::simd::scalar
