#include <atomic>
#include <cstdlib>
#include <string_view>

#include "reachkin/error.hpp"
#include "reachkin/simd/kernels.hpp"

namespace reachkin::simd {

namespace {

Backend detect() {
  if (const char* env = std::getenv("REACHKIN_SIMD")) {
    if (std::string_view(env) == "scalar") return Backend::Scalar;
  }
  return backend_available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_available(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(REACHKIN_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw DomainError(std::string("SIMD backend '") + backend_name(b) + "' is not available");
  }
  current().store(b, std::memory_order_relaxed);
}

#if defined(REACHKIN_HAVE_AVX2)
#define REACHKIN_DISPATCH(fn, ...)                               \
  (active_backend() == Backend::Avx2 ? avx2::fn(__VA_ARGS__) \
                                     : scalar::fn(__VA_ARGS__))
#else
#define REACHKIN_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void chordal_distance_row(const double q[4], QuatColumns cols, std::span<double> out) {
  REACHKIN_DISPATCH(chordal_distance_row, q, cols, out);
}

EmgChannelFeatures emg_channel_features(std::span<const double> x, double deadzone) {
  return REACHKIN_DISPATCH(emg_channel_features, x, deadzone);
}

void finite_difference(std::span<const double> x, double dt, std::span<double> out) {
  REACHKIN_DISPATCH(finite_difference, x, dt, out);
}

#undef REACHKIN_DISPATCH

}  // namespace reachkin::simd
