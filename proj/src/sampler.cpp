#include "hiermirt/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace hiermirt {

namespace {

Eigen::LLT<Matrix> spd_factor(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + ": matrix is not positive definite");
  return llt;
}

Vector standard_normals(Eigen::Index n, Rng& rng) {
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

}  // namespace

double Gaussian::log_density(const Vector& x) const {
  const auto llt = spd_factor(covariance, "Gaussian::log_density");
  const Vector r = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * r.squaredNorm() - 0.5 * log_det - static_cast<double>(mean.size()) * kLogSqrt2Pi;
}

Vector Gaussian::sample(Rng& rng) const {
  const auto llt = spd_factor(covariance, "Gaussian::sample");
  return mean + llt.matrixL() * standard_normals(mean.size(), rng);
}

Gaussian conjugate_normal(const Matrix& gram, const Vector& cross, const Vector& prior_mean, const Matrix& prior_cov) {
  const auto prior = spd_factor(prior_cov, "conjugate_normal: prior covariance");
  const Matrix prior_precision = prior.solve(Matrix::Identity(prior_cov.rows(), prior_cov.cols()));
  const auto post = spd_factor(prior_precision + gram, "conjugate_normal: posterior precision");
  Gaussian g;
  g.covariance = post.solve(Matrix::Identity(gram.rows(), gram.cols()));
  g.covariance = 0.5 * (g.covariance + g.covariance.transpose()).eval();
  g.mean = post.solve(prior_precision * prior_mean + cross);
  return g;
}

// ---------------------------------------------------------------------------

double guess_weight(double m, double c) {
  if (c <= 0.0) return 0.0;
  return c / (c + (1.0 - c) * normal_cdf(m));
}

GuessDraw sample_zx(int y, double m, double c, Rng& rng) {
  if (y == 0) return {false, sample_truncated_normal(rng, m, -kInf, 0.0)};
  if (c > 0.0 && rng.uniform() < guess_weight(m, c)) return {true, 0.0};
  return {false, sample_truncated_normal(rng, m, 0.0, kInf)};
}

// ---------------------------------------------------------------------------

ThetaEvidence::ThetaEvidence(int level1_traits)
    : information(Matrix::Zero(level1_traits, level1_traits)), shift(Vector::Zero(level1_traits)) {}

void ThetaEvidence::add(const Vector& a, double target) {
  information.noalias() += a * a.transpose();
  shift.noalias() += a * target;
}

Matrix prior_trait_precision(const HierarchySpec& spec, const Loadings& loadings) {
  const int dim = spec.total_traits();
  Matrix p = Matrix::Zero(dim, dim);
  const int top = spec.levels() - 1;
  for (int q = 0; q < spec.traits[top]; ++q) p(spec.offset(top) + q, spec.offset(top) + q) += 1.0;
  for (int k = 0; k < top; ++k) {
    for (int q = 0; q < spec.traits[k]; ++q) {
      const double l = loadings[k](q);
      const double inv_var = 1.0 / (1.0 - l * l);
      const int c = spec.offset(k) + q;
      const int r = spec.offset(k + 1) + spec.parent[k][q];
      p(c, c) += inv_var;
      p(r, r) += l * l * inv_var;
      p(c, r) -= l * inv_var;
      p(r, c) -= l * inv_var;
    }
  }
  return p;
}

ThetaConditional::ThetaConditional(const HierarchySpec& spec, const Loadings& loadings, const ThetaEvidence& evidence) {
  for (int k = 0; k <= spec.levels(); ++k) offsets_.push_back(spec.offset(k));
  Matrix p = prior_trait_precision(spec, loadings);
  const auto q1 = evidence.information.rows();
  p.topLeftCorner(q1, q1) += evidence.information;
  llt_.compute(p);
  if (llt_.info() != Eigen::Success) throw NumericalError("theta conditional: singular information matrix");
  Vector shift = Vector::Zero(p.rows());
  shift.head(q1) = evidence.shift;
  mean_ = llt_.solve(shift);
}

ThetaConditional::ThetaConditional(const ThetaConditional& shared, const Vector& level1_shift)
    : offsets_(shared.offsets_), llt_(shared.llt_) {
  Vector shift = Vector::Zero(offsets_.back());
  shift.head(level1_shift.size()) = level1_shift;
  mean_ = llt_.solve(shift);
}

Matrix ThetaConditional::covariance() const {
  const auto d = mean_.size();
  return llt_.solve(Matrix::Identity(d, d));
}

Matrix ThetaConditional::precision() const { return llt_.reconstructedMatrix(); }

ThetaConditional::Level ThetaConditional::level(int k, const Vector& upper) const {
  const int begin = offsets_[k];
  const int n = offsets_[k + 1] - begin;
  const int rest = offsets_.back() - offsets_[k + 1];
  if (upper.size() != rest) throw InputError("ThetaConditional::level: upper-level vector has the wrong size");
  const Matrix u = llt_.matrixU();
  const auto ukk = u.block(begin, begin, n, n).triangularView<Eigen::Upper>();
  Level out;
  const Vector deviation = upper - mean_.tail(rest);
  out.mean = mean_.segment(begin, n) - ukk.solve(u.block(begin, begin + n, n, rest) * deviation);
  const Matrix inv = ukk.solve(Matrix::Identity(n, n));
  out.covariance = inv * inv.transpose();
  return out;
}

Vector ThetaConditional::sample(Rng& rng) const {
  return mean_ + llt_.matrixU().solve(standard_normals(mean_.size(), rng));
}

double ThetaConditional::log_density(const Vector& stacked) const {
  const Vector r = llt_.matrixU() * (stacked - mean_);
  const double half_log_det_precision = llt_.matrixLLT().diagonal().array().log().sum();
  return -0.5 * r.squaredNorm() + half_log_det_precision - static_cast<double>(mean_.size()) * kLogSqrt2Pi;
}

ThetaConditional theta_full_conditional(const HierarchySpec& spec, const Loadings& loadings,
                                        const ThetaEvidence& evidence) {
  return ThetaConditional(spec, loadings, evidence);
}

// ---------------------------------------------------------------------------

double BetaParams::log_density(double x) const {
  if (!(x > 0.0 && x < 1.0)) return -kInf;
  return (alpha - 1.0) * std::log(x) + (beta - 1.0) * std::log1p(-x) + std::lgamma(alpha + beta) -
         std::lgamma(alpha) - std::lgamma(beta);
}

BetaParams c_conditional(int guessed, int observed, double alpha, double beta) {
  if (guessed < 0 || guessed > observed) throw InputError("c_conditional: guessed count outside [0, observed]");
  return {guessed + alpha, observed - guessed + beta};
}

double sample_c(int guessed, int observed, double alpha, double beta, Rng& rng) {
  const auto p = c_conditional(guessed, observed, alpha, beta);
  return rng.beta(p.alpha, p.beta);
}

// ---------------------------------------------------------------------------

Gaussian ab_conditional(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov) {
  if (design.rows() != x.size() || design.cols() != prior_mean.size())
    throw InputError("ab_conditional: design / response / prior dimensions disagree");
  return conjugate_normal(design.transpose() * design, design.transpose() * x, prior_mean, prior_cov);
}

Vector sample_ab(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov, Rng& rng) {
  return ab_conditional(design, x, prior_mean, prior_cov).sample(rng);
}

Gaussian ag_conditional(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov) {
  return ab_conditional(design, x, prior_mean, prior_cov);
}

Vector sample_ag(const Matrix& design, const Vector& x, const Vector& prior_mean, const Matrix& prior_cov, Rng& rng) {
  return ag_conditional(design, x, prior_mean, prior_cov).sample(rng);
}

// ---------------------------------------------------------------------------

LambdaStats LambdaStats::from(const Vector& child, const Vector& parent) {
  if (child.size() != parent.size()) throw InputError("LambdaStats: child and parent lengths differ");
  return {static_cast<double>(child.size()), child.squaredNorm(), child.dot(parent), parent.squaredNorm()};
}

double lambda_log_conditional(double lambda, const LambdaStats& s) {
  if (!(std::abs(lambda) < 1.0)) return -kInf;
  const double var = 1.0 - lambda * lambda;
  const double rss = s.child_sq - 2.0 * lambda * s.cross + lambda * lambda * s.parent_sq;
  return -0.5 * s.n * std::log(var) - 0.5 * rss / var - s.n * kLogSqrt2Pi;
}

double lambda_log_conditional(double lambda, const Vector& child, const Vector& parent) {
  return lambda_log_conditional(lambda, LambdaStats::from(child, parent));
}

MhDraw sample_lambda(double current, const LambdaStats& stats, double step, Rng& rng) {
  const double proposal = current + step * rng.normal();
  const double delta = lambda_log_conditional(proposal, stats) - lambda_log_conditional(current, stats);
  if (std::log(rng.uniform()) < delta) return {proposal, true};
  return {current, false};
}

// ---------------------------------------------------------------------------

double sample_xg(int score, double eta, const Vector& thresholds, Rng& rng) {
  if (score < 0 || score > thresholds.size()) throw InputError("sample_xg: score outside the category range");
  const auto [lo, hi] = grm_interval(score, thresholds);
  if (!(lo < hi)) throw std::logic_error("sample_xg: empty threshold interval");
  return sample_truncated_normal(rng, eta, lo, hi);
}

Vector reparam_b(const Vector& b) {
  if (!strictly_increasing(b)) throw std::domain_error("reparam_b: thresholds must be strictly increasing");
  Vector out(b.size());
  if (b.size() == 0) return out;
  out(0) = b(0);
  for (Eigen::Index m = 1; m < b.size(); ++m) out(m) = b(m) - b(m - 1);
  return out;
}

Vector inverse_reparam_b(const Vector& gaps) {
  Vector out(gaps.size());
  if (gaps.size() == 0) return out;
  out(0) = gaps(0);
  for (Eigen::Index m = 1; m < gaps.size(); ++m) {
    if (!(gaps(m) > 0.0)) throw std::domain_error("inverse_reparam_b: threshold gaps must be positive");
    out(m) = out(m - 1) + gaps(m);
  }
  return out;
}

double collapsed_threshold_logpost(const Vector& thresholds, std::span<const int> scores, const Vector& eta) {
  if (!strictly_increasing(thresholds)) return -kInf;
  double prior = 0.0;
  for (Eigen::Index m = 0; m < thresholds.size(); ++m) prior += normal_logpdf(thresholds(m));
  return prior + loglik_graded_item(scores, eta, thresholds);
}

ThresholdDraw sample_bg(const Vector& current, std::span<const int> scores, const Vector& eta,
                        const ThresholdSteps& steps, Rng& rng, Vector* latent) {
  ThresholdDraw out{current, false, false};
  double logpost = collapsed_threshold_logpost(out.thresholds, scores, eta);

  // Translation of every threshold by a common lattice shift.
  const double shift = snap_threshold(steps.translate * rng.normal());
  Vector translated = out.thresholds.array() + shift;
  const double translated_logpost = collapsed_threshold_logpost(translated, scores, eta);
  if (std::log(rng.uniform()) < translated_logpost - logpost) {
    out.thresholds = std::move(translated);
    logpost = translated_logpost;
    out.translated = true;
  }

  // Gap move: independent N(gap, s^2) truncated to (0, inf) per gap.
  if (out.thresholds.size() >= 2) {
    const Vector gaps = reparam_b(out.thresholds);
    Vector proposed = gaps;
    double log_q_ratio = 0.0;
    bool valid = true;
    for (Eigen::Index m = 1; m < gaps.size(); ++m) {
      const double s = steps.spread;
      const double g = snap_threshold(s * sample_truncated_normal(rng, gaps(m) / s, 0.0, kInf));
      if (!(g > 0.0)) valid = false;
      proposed(m) = g;
      // q(reverse) / q(forward) = Phi(g / s) / Phi(g' / s) for each gap
      log_q_ratio += log_normal_cdf(gaps(m) / s) - log_normal_cdf(g / s);
    }
    const double u = rng.uniform();
    if (valid) {
      Vector candidate = inverse_reparam_b(proposed);
      const double candidate_logpost = collapsed_threshold_logpost(candidate, scores, eta);
      if (std::log(u) < candidate_logpost - logpost + log_q_ratio) {
        out.thresholds = std::move(candidate);
        out.spread = true;
      }
    }
  }

  if (latent) {
    latent->resize(static_cast<Eigen::Index>(scores.size()));
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      (*latent)(jj) = scores[j] == kMissing ? 0.0 : sample_xg(scores[j], eta(jj), out.thresholds, rng);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double adapt_step_size(double acceptance_rate, double scale, double target, int window_index) {
  const double gain = 1.0 / std::sqrt(static_cast<double>(std::max(window_index, 1)));
  return scale * std::exp(gain * (acceptance_rate - target));
}

}  // namespace hiermirt
