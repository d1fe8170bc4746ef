#pragma once

// Special functions used for p-values. Implemented here rather than taken
// from <cmath> so results are identical across platforms and libm versions.
//
// Accuracy targets (checked in tests/test_special_functions.cpp):
//   log_gamma                     ~1e-14 relative for x > 0
//   regularized_incomplete_beta   1e-10 relative for a, b <= 100
//   regularized_gamma_p/q         1e-12 relative
//   erfc / normal_cdf             1e-12 absolute, 1e-10 relative in the tails

namespace riff::special {

/// ln Gamma(x) for x > 0 (Lanczos, g = 7, 9 terms).
double log_gamma(double x);

/// I_x(a, b), continued fraction (modified Lentz).
double regularized_incomplete_beta(double x, double a, double b);

/// Regularized lower / upper incomplete gamma P(a, x), Q(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

/// Complementary error function through Q(1/2, x^2).
double erfc(double x);
double erf(double x);

/// Standard normal CDF and upper tail.
double normal_cdf(double z);
double normal_sf(double z);

/// Student t CDF with `df` degrees of freedom, and the two-sided tail
/// probability P(|T| >= |t|).
double student_t_cdf(double t, double df);
double student_t_two_sided(double t, double df);

}  // namespace riff::special
