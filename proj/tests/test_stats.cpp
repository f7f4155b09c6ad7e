#include <boost/math/special_functions/beta.hpp>
#include <vector>

#include "helpers.hpp"
#include "reachkin/error.hpp"
#include "reachkin/stats.hpp"

using namespace reachkin;
using namespace reachkin::stats;

namespace {

/// Two-sided exact signed-rank p by enumerating every sign assignment.
double signed_rank_brute(const std::vector<double>& d) {
  std::vector<double> mag;
  for (double v : d)
    if (v != 0.0) mag.push_back(std::fabs(v));
  const std::size_t n = mag.size();
  // Average ranks.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, same = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mag[j] < mag[i]) ++below;
      if (mag[j] == mag[i]) ++same;
    }
    rank[i] = below + (same + 1) / 2;
  }
  double w = 0;
  std::size_t k = 0;
  for (double v : d) {
    if (v == 0.0) continue;
    if (v > 0) w += rank[k];
    ++k;
  }
  const double mean = n * (n + 1) / 4.0;
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += rank[i];
    if (std::fabs(s - mean) >= std::fabs(w - mean) - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n);
}

}  // namespace

TEST_CASE("descriptive statistics") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
  CHECK(sample_variance(v) == doctest::Approx(5.0 / 3.0));
  CHECK(sample_sd(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(*sem(v) == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK_FALSE(sem(std::vector<double>{3.0}).has_value());
  CHECK(sample_sd(std::vector<double>{3.0}) == 0.0);
}

TEST_CASE("incomplete beta and t tail against boost") {
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> shape(0.05, 40.0), unit(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const double a = shape(rng), b = shape(rng), x = unit(rng);
    CHECK(std::fabs(incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) <= 1e-12);
  }
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
  CHECK_THROWS_AS(incomplete_beta(0, 1, 0.5), DomainError);

  for (int k = 0; k < 200; ++k) {
    const double df = 1 + 40 * unit(rng), t = 8 * (unit(rng) - 0.5);
    const boost::math::students_t dist(df);
    const double want = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    CHECK(std::fabs(student_t_two_sided(t, df) - want) <= 1e-12);
  }
}

TEST_CASE("paired t-test") {
  SUBCASE("pre equals post") {
    const std::vector<double> x{3.0, 5.0, 9.0};
    const auto r = paired_ttest(x, x);
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
    CHECK_FALSE(r.degenerate);
  }
  SUBCASE("three pairs") {
    const std::vector<double> pre{10, 12, 14}, post{8, 9, 10};
    const auto r = paired_ttest(pre, post);
    CHECK(r.t == doctest::Approx(3.0 * std::sqrt(3.0)));
    CHECK(std::fabs(r.t - 5.196) <= 5e-4);
    CHECK(r.df == 2.0);
    // df = 2 has a closed form: p = 1 - t / sqrt(t^2 + 2) = 0.03510.
    CHECK(std::fabs(r.p - (1 - r.t / std::sqrt(r.t * r.t + 2))) <= 1e-12);
    CHECK(std::fabs(r.p - 0.0352) <= 2e-4);
    CHECK(std::string(significance_stars(r.p)) == "*");

    // Swapping pre and post flips t only.
    const auto s = paired_ttest(post, pre);
    CHECK(s.t == -r.t);
    CHECK(s.p == r.p);
  }
  SUBCASE("constant nonzero differences are degenerate") {
    const std::vector<double> pre{5, 6, 7}, post{4, 5, 6};
    const auto r = paired_ttest(pre, post);
    CHECK(r.degenerate);
    CHECK(r.p == 0.0);
    CHECK(std::isinf(r.t));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(paired_ttest(std::vector<double>{1.0}, std::vector<double>{2.0}), DomainError);
    CHECK_THROWS_AS(paired_ttest(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0}), DomainError);
  }
  SUBCASE("high-precision oracle on 100 seeded cases") {
    std::mt19937_64 rng(82);
    std::uniform_int_distribution<int> n(2, 30);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
      std::vector<double> pre, post;
      const int m = n(rng);
      const double shift = 0.5 * g(rng);
      for (int i = 0; i < m; ++i) {
        pre.push_back(10 + 2 * g(rng));
        post.push_back(pre.back() - shift + g(rng));
      }
      const auto r = paired_ttest(pre, post);
      const auto o = oracle::paired_t(pre, post);
      CHECK(r.t == doctest::Approx(o.t).epsilon(1e-10));
      CHECK(std::fabs(r.p - o.p) <= 1e-6);
    }
  }
}

TEST_CASE("signed-rank test") {
  SUBCASE("all positive, n = 5: p = 2 / 32") {
    const std::vector<double> pre{2, 3, 4, 5, 6}, post{1, 1, 1, 1, 1};
    const auto r = signed_rank_test(pre, post);
    CHECK(r.exact);
    CHECK(r.n == 5);
    CHECK(r.w_plus == 15.0);
    CHECK(r.p == doctest::Approx(0.0625));
  }
  SUBCASE("zeros dropped, ties averaged, exact matches enumeration") {
    std::mt19937_64 rng(83);
    std::uniform_int_distribution<int> v(-4, 4), len(1, 14);
    for (int k = 0; k < 200; ++k) {
      std::vector<double> pre, post, d;
      const int m = len(rng);
      for (int i = 0; i < m; ++i) {
        pre.push_back(v(rng));
        post.push_back(0.0);
        d.push_back(pre.back());
      }
      const auto r = signed_rank_test(pre, post);
      if (r.n == 0) {
        CHECK(r.p == 1.0);
        continue;
      }
      CHECK(r.p == doctest::Approx(std::min(1.0, signed_rank_brute(d))).epsilon(1e-12));
    }
  }
  SUBCASE("normal approximation above 20 pairs tracks the exact tail") {
    std::mt19937_64 rng(84);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> pre, post;
    for (int i = 0; i < 20; ++i) {
      pre.push_back(g(rng) + 0.4);
      post.push_back(0.0);
    }
    const auto exact = signed_rank_test(pre, post);
    CHECK(exact.exact);
    pre.push_back(0.01);
    post.push_back(0.0);
    const auto approx = signed_rank_test(pre, post);
    CHECK_FALSE(approx.exact);
    CHECK(approx.n == 21);
    CHECK(std::fabs(approx.p - exact.p) < 0.05);
  }
}

TEST_CASE("significance stars") {
  CHECK(std::string(significance_stars(0.001)) == "**");
  CHECK(std::string(significance_stars(0.0099)) == "**");
  CHECK(std::string(significance_stars(0.01)) == "*");
  CHECK(std::string(significance_stars(0.049)) == "*");
  CHECK(std::string(significance_stars(0.05)).empty());
  CHECK(std::string(significance_stars(0.7)).empty());
}
