#include "hiermirt/normal.hpp"

#include <limits>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace hiermirt {

double log_normal_cdf(double x) {
  if (std::isnan(x)) return x;
  if (x > 0.0) return std::log1p(-normal_cdf(-x));
  if (x > -37.0) return std::log(normal_cdf(x));
  if (x == -std::numeric_limits<double>::infinity()) return x;
  // Mills-ratio series: Phi(x) ~ phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - 15/x^6).
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (1.0 - r * (3.0 - 15.0 * r));
  return normal_logpdf(x) - std::log(-x) + std::log(series);
}

double normal_interval(double lower, double upper) {
  if (!(lower < upper)) return 0.0;
  if (lower > 0.0) return normal_cdf(-lower) - normal_cdf(-upper);
  return normal_cdf(upper) - normal_cdf(lower);
}

double log_normal_interval(double lower, double upper) {
  if (!(lower < upper)) return -std::numeric_limits<double>::infinity();
  if (lower > 0.0) return log_normal_interval(-upper, -lower);
  // Both ends at or below the mode side: work relative to Phi(upper).
  const double log_up = log_normal_cdf(upper);
  if (lower == -std::numeric_limits<double>::infinity()) return log_up;
  const double log_lo = log_normal_cdf(lower);
  if (upper > 0.0) {
    const double mass = normal_interval(lower, upper);
    if (mass > 1e-3) return std::log(mass);
  }
  return log_up + std::log1p(-std::exp(log_lo - log_up));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double truncated_normal_mean(double mean, double lower, double upper) {
  const double a = lower - mean, b = upper - mean;
  // phi(a) - phi(b) over Phi(b) - Phi(a), both terms in log space for the tails.
  const double log_mass = log_normal_interval(a, b);
  const double pa = std::isinf(a) ? 0.0 : std::exp(normal_logpdf(a) - log_mass);
  const double pb = std::isinf(b) ? 0.0 : std::exp(normal_logpdf(b) - log_mass);
  return mean + pa - pb;
}

}  // namespace hiermirt
