#ifndef FHMM_SPECIAL_HPP
#define FHMM_SPECIAL_HPP

#include <cmath>
#include <span>

namespace fhmm {

// Standard normal CDF via the complementary error function.
// Absolute error is at machine-precision level (< 1e-15).
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse standard normal CDF, Wichura's AS 241 (PPND16).
// |abs error| < 1e-14 over (0, 1).
double norm_ppf(double p);

// Digamma function for positive arguments (recurrence + asymptotic series).
double digamma(double x);

// log(sum(exp(s))) over a small span, stable under large negative values.
double logsumexp(std::span<const double> s);

}  // namespace fhmm

#endif
