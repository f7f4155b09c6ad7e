#include "reachkin/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "reachkin/error.hpp"

namespace reachkin::stats {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double sample_sd(std::span<const double> v) { return std::sqrt(sample_variance(v)); }

std::optional<double> sem(std::span<const double> v) {
  if (v.size() < 2) return std::nullopt;
  return sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
}

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta needs positive shape parameters");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw DomainError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

TTestResult paired_ttest(std::span<const double> pre, std::span<const double> post) {
  if (pre.size() != post.size()) throw DomainError("paired samples differ in length");
  if (pre.size() < 2) throw DomainError("paired t-test needs at least two pairs");
  std::vector<double> diff(pre.size());
  for (std::size_t k = 0; k < pre.size(); ++k) diff[k] = pre[k] - post[k];
  TTestResult r;
  r.df = static_cast<double>(diff.size() - 1);
  const double m = mean(diff);
  const double sd = sample_sd(diff);
  if (sd == 0.0) {
    if (m == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = m > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
      r.degenerate = true;
    }
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(diff.size())));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

SignedRankResult signed_rank_test(std::span<const double> pre, std::span<const double> post) {
  if (pre.size() != post.size()) throw DomainError("paired samples differ in length");
  std::vector<double> diff;
  for (std::size_t k = 0; k < pre.size(); ++k) {
    const double d = pre[k] - post[k];
    if (d != 0.0) diff.push_back(d);
  }
  SignedRankResult r;
  r.n = diff.size();
  if (r.n == 0) return r;

  std::vector<std::size_t> order(r.n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(diff[a]) < std::abs(diff[b]); });
  // Twice the (average) rank, so tied ranks stay integral.
  std::vector<long> rank2(r.n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < r.n;) {
    std::size_t j = i;
    while (j + 1 < r.n && std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) ++j;
    const long twice_avg = static_cast<long>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = twice_avg;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long w2 = 0;
  for (std::size_t k = 0; k < r.n; ++k) {
    if (diff[k] > 0.0) w2 += rank2[k];
  }
  r.w_plus = 0.5 * static_cast<double>(w2);

  const double n = static_cast<double>(r.n);
  if (r.n <= 20) {
    const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (long v : rank2) {
      for (long s = total; s >= v; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - v)];
    }
    const double all = std::pow(2.0, n);
    double lower = 0.0, upper = 0.0;
    for (long s = 0; s <= total; ++s) {
      if (s <= w2) lower += count[static_cast<std::size_t>(s)];
      if (s >= w2) upper += count[static_cast<std::size_t>(s)];
    }
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    r.exact = true;
    return r;
  }
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (std::abs(r.w_plus - mu) - 0.5) / std::sqrt(var);
  r.p = std::min(1.0, std::erfc(std::max(0.0, z) / std::sqrt(2.0)));
  return r;
}

const char* significance_stars(double p) {
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

}  // namespace reachkin::stats
