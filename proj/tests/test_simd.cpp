#include <cstdlib>
#include <string_view>
#include <vector>

#include "helpers.hpp"
#include "reachkin/error.hpp"
#include "reachkin/simd/kernels.hpp"

using namespace reachkin;
using namespace reachkin::simd;

namespace {

struct Columns {
  std::vector<double> w, x, y, z;
  QuatColumns view() const { return {w.data(), x.data(), y.data(), z.data(), w.size()}; }
};

Columns random_columns(std::mt19937_64& rng, std::size_t n) {
  Columns c;
  for (std::size_t k = 0; k < n; ++k) {
    const auto q = oracle::random_unit(rng);
    c.w.push_back(q[0]);
    c.x.push_back(q[1]);
    c.y.push_back(q[2]);
    c.z.push_back(q[3]);
  }
  return c;
}

}  // namespace

// Runs first so the dispatch choice is still the one made at startup.
TEST_CASE("environment pins the scalar backend") {
  const char* env = std::getenv("REACHKIN_SIMD");
  if (env && std::string_view(env) == "scalar") {
    CHECK(active_backend() == Backend::Scalar);
  } else {
    CHECK(active_backend() == (backend_available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar));
  }
}

TEST_CASE("backend selection") {
  CHECK(backend_available(Backend::Scalar));
  CHECK(std::string_view(backend_name(Backend::Scalar)) == "scalar");
  CHECK(std::string_view(backend_name(Backend::Avx2)) == "avx2");
  const Backend before = active_backend();
  set_backend(Backend::Scalar);
  CHECK(active_backend() == Backend::Scalar);
  if (backend_available(Backend::Avx2)) {
    set_backend(Backend::Avx2);
    CHECK(active_backend() == Backend::Avx2);
  } else {
    CHECK_THROWS_AS(set_backend(Backend::Avx2), DomainError);
  }
  set_backend(before);
}

TEST_CASE("scalar kernels against direct formulas") {
  std::mt19937_64 rng(91);
  const auto c = random_columns(rng, 33);
  const auto q = oracle::random_unit(rng);
  std::vector<double> out(33);
  scalar::chordal_distance_row(q.data(), c.view(), out);
  for (std::size_t k = 0; k < out.size(); ++k) {
    CHECK(out[k] == doctest::Approx(oracle::chordal(q, {c.w[k], c.x[k], c.y[k], c.z[k]})).epsilon(1e-14));
  }

  const std::vector<double> x{0.0, 1.0, 4.0, 9.0};
  std::vector<double> d(3);
  scalar::finite_difference(x, 0.5, d);
  CHECK(d == std::vector<double>{2.0, 6.0, 10.0});

  const std::vector<double> s{0.5, -0.5, 0.5, -0.5, 0.25};
  const auto f = scalar::emg_channel_features(s, 0.0);
  CHECK(f.mav == doctest::Approx(0.45));
  CHECK(f.wl == doctest::Approx(3.75));
  CHECK(f.zc == 4);
  CHECK(f.ssc == 3);
}

#if defined(REACHKIN_HAVE_AVX2)
TEST_CASE("AVX2 kernels match the scalar reference") {
  if (!backend_available(Backend::Avx2)) return;
  std::mt19937_64 rng(92);
  std::normal_distribution<double> g(0.0, 1.0);
  // Every length up to a few vectors wide, to cover the remainder lanes.
  for (std::size_t n = 0; n <= 37; ++n) {
    const auto c = random_columns(rng, n);
    const auto q = oracle::random_unit(rng);
    std::vector<double> a(n), b(n);
    scalar::chordal_distance_row(q.data(), c.view(), a);
    avx2::chordal_distance_row(q.data(), c.view(), b);
    CHECK(a == b);
    if (n >= 5) {
      // Offset views exercise unaligned loads.
      std::vector<double> a2(n - 3), b2(n - 3);
      scalar::chordal_distance_row(q.data(), c.view().subspan(3, n - 3), a2);
      avx2::chordal_distance_row(q.data(), c.view().subspan(3, n - 3), b2);
      CHECK(a2 == b2);
    }

    std::vector<double> x(n + 1);
    for (double& v : x) v = g(rng);
    std::vector<double> da(n), db(n);
    scalar::finite_difference(x, 0.01, da);
    avx2::finite_difference(x, 0.01, db);
    CHECK(da == db);

    for (double dz : {0.0, 0.01, 0.5}) {
      const auto fa = scalar::emg_channel_features(x, dz);
      const auto fb = avx2::emg_channel_features(x, dz);
      CHECK(fa.zc == fb.zc);
      CHECK(fa.ssc == fb.ssc);
      CHECK(fb.mav == doctest::Approx(fa.mav).epsilon(1e-13));
      CHECK(fb.wl == doctest::Approx(fa.wl).epsilon(1e-13));
    }
  }

  // Exact zeros and sign-only changes, where the deadzone comparisons bite.
  const std::vector<double> edge{0.0, 0.01, -0.01, 0.0, 0.0, 0.02, -0.005, 0.005, 0.0, -0.01, 0.01, 0.0};
  for (double dz : {0.0, 0.01, 0.02}) {
    const auto fa = scalar::emg_channel_features(edge, dz);
    const auto fb = avx2::emg_channel_features(edge, dz);
    CHECK(fa.zc == fb.zc);
    CHECK(fa.ssc == fb.ssc);
  }
}
#endif
