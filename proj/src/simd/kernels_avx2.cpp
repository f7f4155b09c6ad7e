#include <immintrin.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "reachkin/simd/kernels.hpp"

namespace reachkin::simd::avx2 {

namespace {

inline __m256d abs_pd(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline std::uint32_t count_lanes(__m256d mask) {
  return static_cast<std::uint32_t>(std::popcount(static_cast<unsigned>(_mm256_movemask_pd(mask))));
}

}  // namespace

void chordal_distance_row(const double q[4], QuatColumns cols, std::span<double> out) {
  const __m256d qw = _mm256_set1_pd(q[0]);
  const __m256d qx = _mm256_set1_pd(q[1]);
  const __m256d qy = _mm256_set1_pd(q[2]);
  const __m256d qz = _mm256_set1_pd(q[3]);
  std::size_t k = 0;
  for (; k + 4 <= cols.size; k += 4) {
    const __m256d cw = _mm256_loadu_pd(cols.w + k);
    const __m256d cx = _mm256_loadu_pd(cols.x + k);
    const __m256d cy = _mm256_loadu_pd(cols.y + k);
    const __m256d cz = _mm256_loadu_pd(cols.z + k);
    const __m256d dw = _mm256_sub_pd(qw, cw), dx = _mm256_sub_pd(qx, cx);
    const __m256d dy = _mm256_sub_pd(qy, cy), dz = _mm256_sub_pd(qz, cz);
    const __m256d sw = _mm256_add_pd(qw, cw), sx = _mm256_add_pd(qx, cx);
    const __m256d sy = _mm256_add_pd(qy, cy), sz = _mm256_add_pd(qz, cz);
    // Same association order as the scalar reference, so results are bit-equal.
    __m256d minus = _mm256_add_pd(_mm256_mul_pd(dw, dw), _mm256_mul_pd(dx, dx));
    minus = _mm256_add_pd(minus, _mm256_mul_pd(dy, dy));
    minus = _mm256_add_pd(minus, _mm256_mul_pd(dz, dz));
    __m256d plus = _mm256_add_pd(_mm256_mul_pd(sw, sw), _mm256_mul_pd(sx, sx));
    plus = _mm256_add_pd(plus, _mm256_mul_pd(sy, sy));
    plus = _mm256_add_pd(plus, _mm256_mul_pd(sz, sz));
    _mm256_storeu_pd(out.data() + k, _mm256_sqrt_pd(_mm256_min_pd(minus, plus)));
  }
  if (k < cols.size) {
    scalar::chordal_distance_row(q, cols.subspan(k, cols.size - k), out.subspan(k));
  }
}

EmgChannelFeatures emg_channel_features(std::span<const double> x, double deadzone) {
  EmgChannelFeatures f;
  const std::size_t n = x.size();
  if (n == 0) return f;
  const double* p = x.data();
  const __m256d zero = _mm256_setzero_pd();
  const __m256d dz = _mm256_set1_pd(deadzone);

  __m256d sum_abs = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) sum_abs = _mm256_add_pd(sum_abs, abs_pd(_mm256_loadu_pd(p + i)));
  double mav = hsum(sum_abs);
  for (; i < n; ++i) mav += std::abs(p[i]);
  f.mav = mav / static_cast<double>(n);

  // Pairs (i, i+1) for i in [0, n-2].
  __m256d wl = zero;
  std::uint32_t zc = 0;
  i = 0;
  for (; i + 5 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(p + i);
    const __m256d b = _mm256_loadu_pd(p + i + 1);
    const __m256d d = abs_pd(_mm256_sub_pd(b, a));
    wl = _mm256_add_pd(wl, d);
    const __m256d opposite = _mm256_cmp_pd(_mm256_mul_pd(a, b), zero, _CMP_LT_OQ);
    const __m256d big = _mm256_cmp_pd(d, dz, _CMP_GE_OQ);
    zc += count_lanes(_mm256_and_pd(opposite, big));
  }
  double wl_sum = hsum(wl);
  for (; i + 1 < n; ++i) {
    const double d = p[i + 1] - p[i];
    wl_sum += std::abs(d);
    if (p[i] * p[i + 1] < 0.0 && std::abs(d) >= deadzone) ++zc;
  }
  f.wl = wl_sum;
  f.zc = zc;

  // Triples centred on i in [1, n-2].
  std::uint32_t ssc = 0;
  i = 1;
  for (; i + 5 <= n; i += 4) {
    const __m256d prev = _mm256_loadu_pd(p + i - 1);
    const __m256d cur = _mm256_loadu_pd(p + i);
    const __m256d next = _mm256_loadu_pd(p + i + 1);
    const __m256d back = _mm256_sub_pd(cur, prev);
    const __m256d fwd = _mm256_sub_pd(cur, next);
    const __m256d turn = _mm256_cmp_pd(_mm256_mul_pd(back, fwd), zero, _CMP_GT_OQ);
    const __m256d big = _mm256_or_pd(_mm256_cmp_pd(abs_pd(back), dz, _CMP_GE_OQ),
                                     _mm256_cmp_pd(abs_pd(fwd), dz, _CMP_GE_OQ));
    ssc += count_lanes(_mm256_and_pd(turn, big));
  }
  for (; i + 1 < n; ++i) {
    const double back = p[i] - p[i - 1];
    const double fwd = p[i] - p[i + 1];
    if (back * fwd > 0.0 && (std::abs(back) >= deadzone || std::abs(fwd) >= deadzone)) ++ssc;
  }
  f.ssc = ssc;
  return f;
}

void finite_difference(std::span<const double> x, double dt, std::span<double> out) {
  if (x.size() < 2) return;
  const std::size_t m = x.size() - 1;
  const __m256d vdt = _mm256_set1_pd(dt);
  std::size_t k = 0;
  for (; k + 4 <= m; k += 4) {
    const __m256d a = _mm256_loadu_pd(x.data() + k);
    const __m256d b = _mm256_loadu_pd(x.data() + k + 1);
    _mm256_storeu_pd(out.data() + k, _mm256_div_pd(_mm256_sub_pd(b, a), vdt));
  }
  for (; k < m; ++k) out[k] = (x[k + 1] - x[k]) / dt;
}

}  // namespace reachkin::simd::avx2
