#pragma once

#include <cmath>
#include <numbers>

namespace hiermirt {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Standard normal c.d.f. through the complementary error function, which
/// keeps full relative precision in the lower tail.
template <class Scalar>
inline Scalar normal_cdf(Scalar x) {
  return Scalar(0.5) * std::erfc(-x / std::numbers::sqrt2_v<Scalar>);
}

template <class Scalar>
inline Scalar normal_pdf(Scalar x) {
  return std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

inline double normal_logpdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

/// log Phi(x), finite for every finite x (asymptotic series below -37).
double log_normal_cdf(double x);

/// log(Phi(upper) - Phi(lower)) for lower < upper; either end may be infinite.
double log_normal_interval(double lower, double upper);

/// Phi(upper) - Phi(lower) evaluated on the side of the distribution where the
/// subtraction does not cancel.
double normal_interval(double lower, double upper);

/// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

/// E[X] for X ~ N(mean, 1) restricted to (lower, upper).
double truncated_normal_mean(double mean, double lower, double upper);

}  // namespace hiermirt
