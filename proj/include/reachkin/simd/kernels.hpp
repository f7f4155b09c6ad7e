#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference in
// reachkin::simd::scalar and, on x86-64, an AVX2 variant in
// reachkin::simd::avx2. The unqualified entry points dispatch once, at first
// use, to the best backend the CPU supports. Setting REACHKIN_SIMD=scalar in
// the environment pins the scalar path.

#include <cstddef>
#include <cstdint>
#include <span>

namespace reachkin::simd {

enum class Backend { Scalar, Avx2 };

const char* backend_name(Backend b);
bool backend_available(Backend b);
Backend active_backend();
/// Overrides the dispatch choice. Throws DomainError if `b` is unavailable.
void set_backend(Backend b);

/// Structure-of-arrays view over a quaternion sequence.
struct QuatColumns {
  const double* w;
  const double* x;
  const double* y;
  const double* z;
  std::size_t size;

  QuatColumns subspan(std::size_t offset, std::size_t count) const {
    return {w + offset, x + offset, y + offset, z + offset, count};
  }
};

struct EmgChannelFeatures {
  double mav = 0.0;        // mean absolute value
  double wl = 0.0;         // waveform length, sum of |x[i+1] - x[i]|
  std::uint32_t zc = 0;    // zero crossings beyond the deadzone
  std::uint32_t ssc = 0;   // slope sign changes beyond the deadzone
};

/// out[k] = min(|q - c_k|, |q + c_k|) for every column entry.
void chordal_distance_row(const double q[4], QuatColumns cols, std::span<double> out);

EmgChannelFeatures emg_channel_features(std::span<const double> x, double deadzone);

/// out[k] = (x[k+1] - x[k]) / dt; out.size() == x.size() - 1.
void finite_difference(std::span<const double> x, double dt, std::span<double> out);

namespace scalar {
void chordal_distance_row(const double q[4], QuatColumns cols, std::span<double> out);
EmgChannelFeatures emg_channel_features(std::span<const double> x, double deadzone);
void finite_difference(std::span<const double> x, double dt, std::span<double> out);
}  // namespace scalar

#if defined(REACHKIN_HAVE_AVX2)
namespace avx2 {
void chordal_distance_row(const double q[4], QuatColumns cols, std::span<double> out);
EmgChannelFeatures emg_channel_features(std::span<const double> x, double deadzone);
void finite_difference(std::span<const double> x, double dt, std::span<double> out);
}  // namespace avx2
#endif

}  // namespace reachkin::simd
