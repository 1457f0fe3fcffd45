#include "hiermirt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hiermirt {

namespace {

void require_length(Eigen::Index n, Eigen::Index minimum, const char* what) {
  if (n < minimum)
    throw InputError(std::string(what) + ": trace too short (" + std::to_string(n) + " draws, need " +
                     std::to_string(minimum) + ")");
}

Vector ranks(const Vector& x) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a) < x(b); });
  Vector r(x.size());
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k;
    while (e + 1 < order.size() && x(order[e + 1]) == x(order[k])) ++e;
    const double avg = 0.5 * static_cast<double>(k + e) + 1.0;
    for (std::size_t t = k; t <= e; ++t) r(order[t]) = avg;
    k = e + 1;
  }
  return r;
}

}  // namespace

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw InputError("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile: p must lie in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

PosteriorSummary summarize(std::span<const double> draws) {
  require_length(static_cast<Eigen::Index>(draws.size()), 2, "summarize");
  const Eigen::Map<const Vector> x(draws.data(), static_cast<Eigen::Index>(draws.size()));
  PosteriorSummary s;
  s.mean = x.mean();
  s.sd = std::sqrt((x.array() - s.mean).square().sum() / static_cast<double>(x.size() - 1));
  s.q025 = quantile(draws, 0.025);
  s.q975 = quantile(draws, 0.975);
  s.range = s.q975 - s.q025;
  return s;
}

PosteriorSummary summarize(const Vector& draws) {
  return summarize(std::span<const double>(draws.data(), static_cast<std::size_t>(draws.size())));
}

double rmse(const Vector& estimates, const Vector& truth) {
  if (estimates.size() != truth.size()) throw InputError("rmse: length mismatch");
  if (estimates.size() == 0) throw InputError("rmse: empty input");
  return std::sqrt((estimates - truth).squaredNorm() / static_cast<double>(truth.size()));
}

double rmse(const Matrix& estimates, const Matrix& truth) {
  if (estimates.rows() != truth.rows() || estimates.cols() != truth.cols()) throw InputError("rmse: shape mismatch");
  if (estimates.size() == 0) throw InputError("rmse: empty input");
  return std::sqrt((estimates - truth).squaredNorm() / static_cast<double>(truth.size()));
}

Vector averaged_general_trait(const Matrix& level1_means) {
  if (level1_means.rows() < 1) throw InputError("averaged_general_trait: need at least one trait");
  return level1_means.colwise().mean().transpose();
}

double ess(const Vector& trace) {
  require_length(trace.size(), 100, "ess");
  const Eigen::Index n = trace.size();
  const Vector d = trace.array() - trace.mean();
  const double c0 = d.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  const auto autocov = [&](Eigen::Index lag) {
    return d.head(n - lag).dot(d.tail(n - lag)) / static_cast<double>(n);
  };
  // Pair sums Gamma_m = c(2m) + c(2m+1), truncated at the first non-positive
  // one and forced to be non-increasing.
  double sum = 0.0;
  double previous = kInf;
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double gamma = autocov(2 * m) + autocov(2 * m + 1);
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, previous);
    previous = gamma;
    sum += gamma;
  }
  const double tau = (2.0 * sum - c0) / c0;
  return static_cast<double>(n) / std::max(tau, 1e-12);
}

double geweke_z(const Vector& trace) {
  require_length(trace.size(), 100, "geweke_z");
  const Eigen::Index n = trace.size();
  const Eigen::Index na = n / 10;
  const Eigen::Index nb = n / 2;
  const Vector a = trace.head(na);
  const Vector b = trace.tail(nb);
  const auto segment_var = [](const Vector& s) {
    const double v = (s.array() - s.mean()).square().sum() / static_cast<double>(s.size() - 1);
    if (!(v > 0.0)) return 0.0;
    // Short segments fall back to the plain variance of the mean.
    const double e = s.size() >= 100 ? ess(s) : static_cast<double>(s.size());
    return v / e;
  };
  const double var = segment_var(a) + segment_var(b);
  const double diff = a.mean() - b.mean();
  if (!(var > 0.0)) return diff == 0.0 ? 0.0 : std::copysign(kInf, diff);
  return diff / std::sqrt(var);
}

double pearson_correlation(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("correlation: need two equal-length vectors");
  const Vector dx = x.array() - x.mean();
  const Vector dy = y.array() - y.mean();
  return dx.dot(dy) / std::sqrt(dx.squaredNorm() * dy.squaredNorm());
}

double spearman_correlation(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("correlation: need two equal-length vectors");
  return pearson_correlation(ranks(x), ranks(y));
}

}  // namespace hiermirt
