#pragma once

#include <span>

#include "hiermirt/model.hpp"
#include "hiermirt/random.hpp"

namespace hiermirt {

/// Multivariate normal with an explicit covariance.
struct Gaussian {
  Vector mean;
  Matrix covariance;

  double log_density(const Vector& x) const;
  Vector sample(Rng& rng) const;
};

/// Posterior of coefficients with prior N(prior_mean, prior_cov) after
/// unit-variance Gaussian observations summarized by gram = C C' and
/// cross = C x:  cov = (prior_cov^-1 + gram)^-1, mean = cov (prior_cov^-1 prior_mean + cross).
Gaussian conjugate_normal(const Matrix& gram, const Vector& cross, const Vector& prior_mean, const Matrix& prior_cov);

// ---------------------------------------------------------------------------
// (Z, X) for one dichotomous cell

struct GuessDraw {
  bool guessed;
  double x;
};

/// P(Z = 1 | Y = 1) = c / (c + (1 - c) Phi(m)).
double guess_weight(double m, double c);

/// Joint draw of the guess indicator and the latent response given y and
/// the linear predictor m = a . theta1 - b.
GuessDraw sample_zx(int y, double m, double c, Rng& rng);

// ---------------------------------------------------------------------------
// theta

/// Linear-Gaussian evidence on one subject's level-1 traits from cells with
/// Z = 0 (and graded cells): information = sum a a', shift = sum a target.
struct ThetaEvidence {
  Matrix information;
  Vector shift;

  explicit ThetaEvidence(int level1_traits);
  /// target is x + b for a dichotomous cell, x^G for a graded cell.
  void add(const Vector& a, double target);
};

/// Precision of a subject's stacked traits (level 0 first) under the hierarchical prior.
Matrix prior_trait_precision(const HierarchySpec& spec, const Loadings& loadings);

/// Exact Gaussian full conditional of one subject's traits at every level.
/// Drawing solves the precision Cholesky factor from the last (top) level
/// down, which is the recursive top-down factorization.
class ThetaConditional {
 public:
  ThetaConditional(const HierarchySpec& spec, const Loadings& loadings, const ThetaEvidence& evidence);
  /// Same precision (information) as `shared`, different shift.
  ThetaConditional(const ThetaConditional& shared, const Vector& level1_shift);

  struct Level {
    Vector mean;
    Matrix covariance;
  };

  const Vector& mean() const { return mean_; }
  Matrix covariance() const;
  Matrix precision() const;
  /// Conditional of level k given the stacked values of all levels above it
  /// (levels below marginalized out).
  Level level(int k, const Vector& upper) const;
  Vector sample(Rng& rng) const;
  double log_density(const Vector& stacked) const;

 private:
  std::vector<int> offsets_;
  Eigen::LLT<Matrix> llt_;
  Vector mean_;
};

ThetaConditional theta_full_conditional(const HierarchySpec& spec, const Loadings& loadings,
                                        const ThetaEvidence& evidence);

// ---------------------------------------------------------------------------
// c

struct BetaParams {
  double alpha;
  double beta;

  double log_density(double x) const;
};

BetaParams c_conditional(int guessed, int observed, double alpha, double beta);
double sample_c(int guessed, int observed, double alpha, double beta, Rng& rng);

// ---------------------------------------------------------------------------
// (a, b)

/// design rows: (theta1 on the item's free traits..., -1) per contributing
/// subject; x: their latent responses.
Gaussian ab_conditional(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov);
Vector sample_ab(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov, Rng& rng);

// ---------------------------------------------------------------------------
// lambda

/// Sufficient statistics of (child, parent) trait pairs.
struct LambdaStats {
  double n = 0;
  double child_sq = 0;
  double cross = 0;
  double parent_sq = 0;

  static LambdaStats from(const Vector& child, const Vector& parent);
};

/// sum_j log N(child_j; lambda * parent_j, 1 - lambda^2), -inf outside (-1, 1).
double lambda_log_conditional(double lambda, const Vector& child, const Vector& parent);
double lambda_log_conditional(double lambda, const LambdaStats& stats);

struct MhDraw {
  double value;
  bool accepted;
};

/// One Gaussian random-walk Metropolis step.
MhDraw sample_lambda(double current, const LambdaStats& stats, double step, Rng& rng);

// ---------------------------------------------------------------------------
// graded items

/// N(eta, 1) restricted to the interval of the observed score.
double sample_xg(int score, double eta, const Vector& thresholds, Rng& rng);

/// (b_1, b_2 - b_1, ..., b_{M-1} - b_{M-2}).
Vector reparam_b(const Vector& b);
/// Cumulative sum; throws std::domain_error on a non-positive gap.
Vector inverse_reparam_b(const Vector& gaps);

struct ThresholdSteps {
  double translate;
  double spread;
};

struct ThresholdDraw {
  Vector thresholds;
  bool translated;
  bool spread;
};

/// Collapsed target: graded likelihood of one item times N(0, 1) per threshold.
double collapsed_threshold_logpost(const Vector& thresholds, std::span<const int> scores, const Vector& eta);

/// Translation move on b*_1 then a positive-truncated random walk on the
/// gaps (with the truncation normalizers in the acceptance ratio). When
/// `latent` is given, the item's X^G row is redrawn from the new thresholds.
ThresholdDraw sample_bg(const Vector& current, std::span<const int> scores, const Vector& eta,
                        const ThresholdSteps& steps, Rng& rng, Vector* latent = nullptr);

/// design rows: theta1 on the item's free traits per observed subject.
Gaussian ag_conditional(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov);
Vector sample_ag(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov, Rng& rng);

// ---------------------------------------------------------------------------

/// Robbins-Monro step on log(scale) toward the target acceptance rate with
/// gain 1/sqrt(window_index).
double adapt_step_size(double acceptance_rate, double scale, double target, int window_index = 1);

}  // namespace hiermirt
