#pragma once

#include <optional>
#include <span>

namespace reachkin::stats {

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> v);
double sample_variance(std::span<const double> v);
/// Standard error of the mean; nullopt for fewer than two values.
std::optional<double> sem(std::span<const double> v);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| >= |t|) of Student's t with df degrees.
double student_t_two_sided(double t, double df);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  /// Differences had zero variance but nonzero mean: t is infinite, p is 0.
  bool degenerate = false;
};

/// Paired two-sided t-test on pre - post. Throws DomainError for unequal
/// lengths or fewer than two pairs.
TTestResult paired_ttest(std::span<const double> pre, std::span<const double> post);

struct SignedRankResult {
  double w_plus = 0.0;  // sum of ranks of positive differences
  std::size_t n = 0;    // non-zero differences
  double p = 1.0;       // two-sided
  bool exact = false;   // exact enumeration vs normal approximation
};

/// Wilcoxon signed-rank test on pre - post with average ranks for ties.
/// Exact null distribution up to 20 non-zero pairs, normal approximation above.
SignedRankResult signed_rank_test(std::span<const double> pre, std::span<const double> post);

/// Significance stars: "**" for p < 0.01, "*" for p < 0.05, else "".
const char* significance_stars(double p);

}  // namespace reachkin::stats
