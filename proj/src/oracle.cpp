#include "hiermirt/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "hiermirt/hierarchy.hpp"

namespace hiermirt::oracle {

namespace {

double axis_weight(const Vector& axis, Eigen::Index i) {
  if (axis.size() < 2) return 1.0;
  const double h = (axis(axis.size() - 1) - axis(0)) / static_cast<double>(axis.size() - 1);
  return (i == 0 || i == axis.size() - 1) ? 0.5 * h : h;
}

Eigen::Index flat_size(const std::vector<Vector>& axes) {
  Eigen::Index n = 1;
  for (const auto& a : axes) n *= a.size();
  return n;
}

std::vector<Eigen::Index> unflatten(const std::vector<Vector>& axes, Eigen::Index n) {
  std::vector<Eigen::Index> idx(axes.size());
  for (int d = static_cast<int>(axes.size()) - 1; d >= 0; --d) {
    idx[d] = n % axes[d].size();
    n /= axes[d].size();
  }
  return idx;
}

void normalize(GridPosterior& g) {
  const Eigen::Index n = g.log_density.size();
  const double peak = g.log_density.maxCoeff();
  if (!std::isfinite(peak)) throw NumericalError("grid posterior: density vanishes on the whole grid");
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) total += g.weight(k) * std::exp(g.log_density(k) - peak);
  g.log_normalizer = peak + std::log(total);
  g.density = (g.log_density.array() - g.log_normalizer).exp();
}

/// Dense multivariate normal log density; independent of the sampler's.
double mvn_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("oracle: prior covariance is not positive definite");
  const Vector r = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * r.squaredNorm() - 0.5 * log_det - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI);
}

double log_std_normal(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI); }

double subject_log_likelihood(const ItemBank& items, const std::vector<int>& scores, const Vector& theta1) {
  double ll = 0.0;
  for (int i = 0; i < items.size(); ++i) {
    const int y = scores[i];
    if (y == kMissing) continue;
    if (items.is_graded(i)) {
      const Vector p = grm_category_probs(items.a.row(i).transpose(), theta1, items.thresholds[i]);
      ll += std::log(p(y));
    } else {
      const double p = prob_correct(items.a.row(i).transpose(), theta1, items.b(i), items.c(i));
      ll += y == 1 ? std::log(p) : std::log1p(-p);
    }
  }
  return ll;
}

GridPosterior evaluate_theta_grid(const HierarchySpec& spec, const Loadings& loadings, const ItemBank& items,
                                  const std::vector<int>& scores, std::vector<Vector> axes) {
  GridPosterior g;
  g.axes = std::move(axes);
  const Eigen::Index n = flat_size(g.axes);
  g.log_density.resize(n);
  const int q1 = spec.traits[0];
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vector x = g.point(k);
    g.log_density(k) = prior_trait_logdensity(spec, loadings, x) + subject_log_likelihood(items, scores, x.head(q1));
  }
  normalize(g);
  return g;
}

}  // namespace

Vector GridPosterior::point(Eigen::Index n) const {
  const auto idx = unflatten(axes, n);
  Vector x(dims());
  for (int d = 0; d < dims(); ++d) x(d) = axes[d](idx[d]);
  return x;
}

double GridPosterior::weight(Eigen::Index n) const {
  const auto idx = unflatten(axes, n);
  double w = 1.0;
  for (int d = 0; d < dims(); ++d) w *= axis_weight(axes[d], idx[d]);
  return w;
}

double GridPosterior::total_mass() const {
  double s = 0.0;
  for (Eigen::Index k = 0; k < density.size(); ++k) s += weight(k) * density(k);
  return s;
}

Vector GridPosterior::mean() const {
  Vector m = Vector::Zero(dims());
  for (Eigen::Index k = 0; k < density.size(); ++k) m += weight(k) * density(k) * point(k);
  return m;
}

Matrix GridPosterior::covariance() const {
  const Vector m = mean();
  Matrix c = Matrix::Zero(dims(), dims());
  for (Eigen::Index k = 0; k < density.size(); ++k) {
    const Vector d = point(k) - m;
    c += weight(k) * density(k) * d * d.transpose();
  }
  return c;
}

Vector GridPosterior::marginal(int axis) const {
  Vector out = Vector::Zero(axes[axis].size());
  for (Eigen::Index k = 0; k < density.size(); ++k) {
    const auto idx = unflatten(axes, k);
    out(idx[axis]) += density(k) * weight(k) / axis_weight(axes[axis], idx[axis]);
  }
  return out;
}

GridPosterior grid_posterior_theta(const HierarchySpec& spec, const Loadings& loadings, const ItemBank& items,
                                   const std::vector<int>& scores, const GridSpec& grid) {
  const int dims = spec.total_traits();
  if (dims > 3) throw InputError("grid_posterior_theta: at most 3 latent dimensions are supported");
  if (static_cast<int>(scores.size()) != items.size()) throw InputError("grid_posterior_theta: one score per item");
  if (grid.points < 3) throw InputError("grid_posterior_theta: need at least 3 points per axis");

  // Locate the posterior on a wide prior-scale grid, then refine around it.
  std::vector<Vector> wide(dims, Vector::LinSpaced(grid.points, -8.0, 8.0));
  const GridPosterior coarse = evaluate_theta_grid(spec, loadings, items, scores, wide);
  const Vector m = coarse.mean();
  const Vector sd = coarse.covariance().diagonal().cwiseSqrt();
  std::vector<Vector> axes(dims);
  for (int d = 0; d < dims; ++d) {
    const double half = grid.half_width_sd * std::max(sd(d), 1e-3);
    axes[d] = Vector::LinSpaced(grid.points, m(d) - half, m(d) + half);
  }
  return evaluate_theta_grid(spec, loadings, items, scores, std::move(axes));
}

GridPosterior grid_from_log_density(const Vector& axis, const Vector& log_density) {
  if (axis.size() != log_density.size() || axis.size() < 2)
    throw InputError("grid_from_log_density: need matching axis and values");
  GridPosterior g;
  g.axes = {axis};
  g.log_density = log_density;
  normalize(g);
  return g;
}

// ---------------------------------------------------------------------------

double augmented_log_joint(const HierarchySpec& spec, const ModelState& st, const Priors& priors,
                           const ResponseMatrix& responses) {
  const auto& items = st.items;
  const auto& aug = st.augmented;
  const Matrix& theta1 = st.traits.theta[0];
  const int q1 = spec.traits[0];
  double lj = 0.0;

  for (int i = 0; i < items.size(); ++i) {
    for (int j = 0; j < responses.subjects(); ++j) {
      const int y = responses.cells(i, j);
      if (y == kMissing) continue;
      const double x = aug.latent(i, j);
      double eta = 0.0;
      for (int q = 0; q < q1; ++q) eta += items.a(i, q) * theta1(q, j);
      if (items.is_graded(i)) {
        const Vector& t = items.thresholds[i];
        const double lo = y == 0 ? -kInf : t(y - 1);
        const double hi = y == t.size() ? kInf : t(y);
        if (!(x > lo && x < hi)) return -kInf;
        lj += log_std_normal(x - eta);
      } else {
        const double c = items.c(i);
        if (aug.guessed(i, j)) {
          if (y != 1 || x != 0.0 || !(c > 0.0)) return -kInf;
          lj += std::log(c);
        } else {
          if ((y == 1) != (x > 0.0)) return -kInf;
          lj += std::log1p(-c) + log_std_normal(x - (eta - items.b(i)));
        }
      }
    }
  }

  for (const auto& l : st.lambda)
    for (Eigen::Index q = 0; q < l.size(); ++q) {
      if (!(std::abs(l(q)) < 1.0)) return -kInf;
      lj += std::log(0.5);
    }
  for (int j = 0; j < responses.subjects(); ++j) lj += prior_trait_logdensity(spec, st.lambda, st.traits.stacked(j));

  for (int i = 0; i < items.size(); ++i) {
    const auto& s = items.specs[i];
    for (int q = 0; q < q1; ++q) {
      const bool free = std::find(s.loads.begin(), s.loads.end(), q) != s.loads.end();
      if (!free && items.a(i, q) != 0.0) return -kInf;
    }
    std::vector<Eigen::Index> idx(s.loads.begin(), s.loads.end());
    if (items.is_graded(i)) {
      Vector v(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t n = 0; n < idx.size(); ++n) v(static_cast<Eigen::Index>(n)) = items.a(i, idx[n]);
      lj += mvn_logpdf(v, priors.ag_mean(idx), priors.ag_cov(idx, idx));
      const Vector& t = items.thresholds[i];
      for (Eigen::Index m = 0; m < t.size(); ++m) {
        if (m > 0 && !(t(m) > t(m - 1))) return -kInf;
        lj += log_std_normal(t(m));
      }
    } else {
      idx.push_back(q1);
      Vector v(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t n = 0; n + 1 < idx.size(); ++n) v(static_cast<Eigen::Index>(n)) = items.a(i, idx[n]);
      v(v.size() - 1) = items.b(i);
      lj += mvn_logpdf(v, priors.ab_mean(idx), priors.ab_cov(idx, idx));
      if (s.guessing) {
        const double c = items.c(i);
        if (!(c > 0.0 && c < 1.0)) return -kInf;
        lj += (priors.c_alpha - 1.0) * std::log(c) + (priors.c_beta - 1.0) * std::log1p(-c) +
              std::lgamma(priors.c_alpha + priors.c_beta) - std::lgamma(priors.c_alpha) - std::lgamma(priors.c_beta);
      } else if (items.c(i) != 0.0) {
        return -kInf;
      }
    }
  }
  return lj;
}

std::vector<double> logjoint_block_slice(const HierarchySpec& spec, const ModelState& state, const Priors& priors,
                                         const ResponseMatrix& responses, const SliceTarget& t,
                                         const std::vector<double>& grid) {
  ModelState st = state;
  double* slot = nullptr;
  const auto check_item = [&](bool graded) {
    if (t.item < 0 || t.item >= st.items.size() || st.items.is_graded(t.item) != graded)
      throw InputError("logjoint_block_slice: item does not match the block kind");
  };
  switch (t.block) {
    case SliceBlock::c:
      check_item(false);
      slot = &st.items.c(t.item);
      break;
    case SliceBlock::ab: {
      check_item(false);
      const auto& loads = st.items.specs[t.item].loads;
      const int n = static_cast<int>(loads.size());
      if (t.index < 0 || t.index > n) throw InputError("logjoint_block_slice: (a, b) coordinate out of range");
      slot = t.index == n ? &st.items.b(t.item) : &st.items.a(t.item, loads[t.index]);
      break;
    }
    case SliceBlock::ag: {
      check_item(true);
      const auto& loads = st.items.specs[t.item].loads;
      if (t.index < 0 || t.index >= static_cast<int>(loads.size()))
        throw InputError("logjoint_block_slice: a^G coordinate out of range");
      slot = &st.items.a(t.item, loads[t.index]);
      break;
    }
    case SliceBlock::theta: {
      if (t.subject < 0 || t.subject >= st.traits.subjects() || t.index < 0 || t.index >= spec.total_traits())
        throw InputError("logjoint_block_slice: theta coordinate out of range");
      int level = 0;
      while (t.index >= spec.offset(level + 1)) ++level;
      slot = &st.traits.theta[level](t.index - spec.offset(level), t.subject);
      break;
    }
    case SliceBlock::lambda:
      if (t.level < 0 || t.level + 1 >= spec.levels() || t.trait < 0 || t.trait >= spec.traits[t.level])
        throw InputError("logjoint_block_slice: lambda index out of range");
      slot = &st.lambda[t.level](t.trait);
      break;
    case SliceBlock::bg:
      check_item(true);
      if (t.index < 0 || t.index >= st.items.thresholds[t.item].size())
        throw InputError("logjoint_block_slice: threshold index out of range");
      slot = &st.items.thresholds[t.item](t.index);
      break;
    default: throw InputError("logjoint_block_slice: invalid block id");
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double v : grid) {
    *slot = v;
    out.push_back(augmented_log_joint(spec, st, priors, responses));
  }
  return out;
}

// ---------------------------------------------------------------------------

AugmentationCheck augmentation_marginal_check(double m, double c, long draws, Rng& rng) {
  if (draws < 1) throw InputError("augmentation_marginal_check: need at least one draw");
  if (!(c >= 0.0 && c < 1.0)) throw InputError("augmentation_marginal_check: c must lie in [0, 1)");
  long correct = 0, guessed_correct = 0, latent_correct = 0;
  double x_sum = 0.0;
  for (long n = 0; n < draws; ++n) {
    const bool z = rng.uniform() < c;
    const double x = z ? 0.0 : m + rng.normal();
    const bool y = z || x > 0.0;
    if (!y) continue;
    ++correct;
    if (z) {
      ++guessed_correct;
    } else {
      ++latent_correct;
      x_sum += x;
    }
  }
  AugmentationCheck out;
  out.analytic = c + (1.0 - c) * normal_cdf(m);
  out.empirical = static_cast<double>(correct) / static_cast<double>(draws);
  out.mc_se = std::sqrt(out.analytic * (1.0 - out.analytic) / static_cast<double>(draws));
  out.guess_given_correct = correct ? static_cast<double>(guessed_correct) / static_cast<double>(correct) : 0.0;
  out.x_mean_correct = latent_correct ? x_sum / static_cast<double>(latent_correct) : 0.0;
  return out;
}

}  // namespace hiermirt::oracle
