#pragma once

#include <vector>

#include "hiermirt/model.hpp"
#include "hiermirt/random.hpp"

// Brute-force references. Nothing here calls into the sampler.

namespace hiermirt::oracle {

/// Tensor-product grid with normalized density values (trapezoid rule).
/// Points are stored with the first axis varying slowest.
struct GridPosterior {
  std::vector<Vector> axes;
  Vector log_density;  ///< unnormalized
  Vector density;      ///< normalized
  double log_normalizer = 0.0;

  int dims() const { return static_cast<int>(axes.size()); }
  /// Coordinates of flat point n.
  Vector point(Eigen::Index n) const;
  /// Trapezoid weight of flat point n (product of per-axis weights).
  double weight(Eigen::Index n) const;
  /// Sum of density * weight; 1 up to rounding after normalization.
  double total_mass() const;
  Vector mean() const;
  Matrix covariance() const;
  /// Marginal density along one axis, normalized on that axis.
  Vector marginal(int axis) const;
};

struct GridSpec {
  int points = 401;
  double half_width_sd = 6.0;
};

/// Posterior of one subject's stacked traits given fixed items and loadings,
/// using the response probabilities directly (no augmentation). `scores`
/// holds the subject's responses, kMissing allowed. At most 3 traits.
GridPosterior grid_posterior_theta(const HierarchySpec& spec, const Loadings& loadings, const ItemBank& items,
                                   const std::vector<int>& scores, const GridSpec& grid = {});

/// Normalizes an arbitrary 1-D log density on a grid.
GridPosterior grid_from_log_density(const Vector& axis, const Vector& log_density);

enum class SliceBlock { c, ab, ag, theta, lambda, bg };

/// Which scalar of the state a slice varies.
struct SliceTarget {
  SliceBlock block = SliceBlock::c;
  int item = 0;     ///< c, ab, ag, bg
  int index = 0;    ///< ab: position among (free a..., b); ag: free a position; theta: stacked index; bg: threshold
  int subject = 0;  ///< theta
  int level = 0;    ///< lambda (child level, 0-based)
  int trait = 0;    ///< lambda (child trait)
};

/// Full augmented log joint density of (Y, X, Z, X^G, theta, lambda, items).
/// Unobserved cells contribute nothing; inconsistent augmentation yields -inf.
double augmented_log_joint(const HierarchySpec& spec, const ModelState& state, const Priors& priors,
                           const ResponseMatrix& responses);

/// augmented_log_joint with one scalar replaced by each grid value in turn.
std::vector<double> logjoint_block_slice(const HierarchySpec& spec, const ModelState& state, const Priors& priors,
                                         const ResponseMatrix& responses, const SliceTarget& target,
                                         const std::vector<double>& grid);

struct AugmentationCheck {
  double analytic;       ///< c + (1 - c) Phi(m)
  double empirical;      ///< fraction of Y = 1 reconstructed from (Z, X)
  double mc_se;
  double guess_given_correct;  ///< empirical P(Z = 1 | Y = 1)
  double x_mean_correct;       ///< empirical E[X | Y = 1, Z = 0]
};

/// Draws (Z, X) from the augmented generative model, Z ~ Bern(c), X = 0 when
/// Z = 1 and N(m, 1) otherwise, and reconstructs Y = 1{Z = 1 or X > 0}.
AugmentationCheck augmentation_marginal_check(double m, double c, long draws, Rng& rng);

}  // namespace hiermirt::oracle
