#pragma once

#include <span>

#include "hiermirt/model.hpp"

namespace hiermirt {

struct PosteriorSummary {
  double mean;
  double sd;    ///< denominator n - 1
  double q025;
  double q975;
  double range;  ///< q975 - q025
};

/// Type-7 quantile: linear interpolation between order statistics at
/// h = (n - 1) p, i.e. x[floor(h)] + (h - floor(h)) (x[floor(h) + 1] - x[floor(h)]).
double quantile(std::span<const double> values, double p);

/// Requires at least two draws.
PosteriorSummary summarize(std::span<const double> draws);
PosteriorSummary summarize(const Vector& draws);

/// sqrt(sum (estimate - truth)^2 / n).
double rmse(const Vector& estimates, const Vector& truth);
/// Over every entry of equally shaped matrices.
double rmse(const Matrix& estimates, const Matrix& truth);

/// Per-subject mean of the level-1 posterior means (Q_1 x J input).
Vector averaged_general_trait(const Matrix& level1_means);

/// Effective sample size by Geyer's initial monotone sequence estimator.
/// A constant trace has ESS = n. Requires at least 100 draws.
double ess(const Vector& trace);

/// Geweke z between the first 10% and the last 50% of the trace, each
/// segment's variance taken as var / ESS. Requires at least 100 draws.
double geweke_z(const Vector& trace);

double pearson_correlation(const Vector& x, const Vector& y);
double spearman_correlation(const Vector& x, const Vector& y);

}  // namespace hiermirt
