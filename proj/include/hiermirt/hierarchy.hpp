#pragma once

#include <string>
#include <vector>

#include "hiermirt/model.hpp"
#include "hiermirt/random.hpp"

namespace hiermirt {

struct HierarchyViolation {
  int level;  ///< 1-based level of the offending trait
  int trait;  ///< 1-based trait index within the level
  std::string message;
};

/// Loading sparsity pattern as declared by a user: pattern[k] is
/// Q_k x Q_{k+1}, true where lambda^{(k+1)}_{qq'} may be non-null.
struct HierarchyPattern {
  std::vector<int> traits;
  std::vector<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> pattern;

  static HierarchyPattern from_spec(const HierarchySpec& spec);
};

/// Empty when the tree is valid: dense indices, one parent per child,
/// at least three children for every non-bottom trait.
std::vector<HierarchyViolation> validate_hierarchy(const HierarchySpec& spec);
std::vector<HierarchyViolation> validate_hierarchy(const HierarchyPattern& pattern);

/// Builds the parent map; throws InputError listing violations.
HierarchySpec hierarchy_from_pattern(const HierarchyPattern& pattern);

/// Convenience form that throws InputError listing every violation.
void require_valid_hierarchy(const HierarchySpec& spec);

/// Checks shape against the hierarchy and |lambda| < 1 everywhere.
void validate_loadings(const HierarchySpec& spec, const Loadings& loadings);

/// Uniform loading value for every child trait.
Loadings constant_loadings(const HierarchySpec& spec, double value);

/// sqrt(1 - lambda^2) for every child trait.
Loadings error_scales(const Loadings& loadings);

/// Draws J subjects from the hierarchical prior, top level first.
LatentState sample_prior_traits(const HierarchySpec& spec, const Loadings& loadings, int subjects, Rng& rng);

/// log N(child; lambda * parent, 1 - lambda^2). Throws std::domain_error for |lambda| >= 1.
double conditional_trait_logdensity(double child, double parent, double lambda);

/// Log prior density of one subject's stacked trait vector.
double prior_trait_logdensity(const HierarchySpec& spec, const Loadings& loadings, const Vector& stacked);

struct MarginalMoments {
  int level;  ///< 0-based
  int trait;  ///< 0-based
  double mean;
  double variance;
  double mean_se;
  double variance_se;
};

/// Monte Carlo estimate of every trait's marginal prior mean and variance.
std::vector<MarginalMoments> check_marginal_scale(const HierarchySpec& spec, const Loadings& loadings, int draws,
                                                  Rng& rng);

/// Analytic marginal variance of every trait implied by the recursion.
std::vector<Vector> implied_marginal_variance(const HierarchySpec& spec, const Loadings& loadings);

}  // namespace hiermirt
