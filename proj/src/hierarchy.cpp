#include "hiermirt/hierarchy.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hiermirt {

std::vector<HierarchyViolation> validate_hierarchy(const HierarchySpec& spec) {
  std::vector<HierarchyViolation> out;
  for (int k = 0; k + 1 < spec.levels() && k < static_cast<int>(spec.parent.size()); ++k) {
    const auto& parent = spec.parent[k];
    for (int q = 0; q < static_cast<int>(parent.size()); ++q)
      if (parent[q] < 0 || parent[q] >= spec.traits[k + 1])
        out.push_back({k + 1, q + 1, "parent index outside level " + std::to_string(k + 2)});
    if (static_cast<int>(parent.size()) != spec.traits[k])
      out.push_back({k + 1, 0, "parent map length differs from the trait count"});
  }
  if (!out.empty()) return out;
  return validate_hierarchy(HierarchyPattern::from_spec(spec));
}

namespace {

void throw_violations(const std::vector<HierarchyViolation>& violations) {
  if (violations.empty()) return;
  std::ostringstream os;
  os << "invalid hierarchy:";
  for (const auto& v : violations) os << " [level " << v.level << ", trait " << v.trait << ": " << v.message << "]";
  throw InputError(os.str());
}

}  // namespace

void require_valid_hierarchy(const HierarchySpec& spec) { throw_violations(validate_hierarchy(spec)); }

HierarchyPattern HierarchyPattern::from_spec(const HierarchySpec& spec) {
  HierarchyPattern p;
  p.traits = spec.traits;
  for (int k = 0; k + 1 < spec.levels() && k < static_cast<int>(spec.parent.size()); ++k) {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> m =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(spec.traits[k], spec.traits[k + 1], false);
    const auto& parent = spec.parent[k];
    for (int q = 0; q < static_cast<int>(parent.size()) && q < spec.traits[k]; ++q)
      if (parent[q] >= 0 && parent[q] < spec.traits[k + 1]) m(q, parent[q]) = true;
    p.pattern.push_back(std::move(m));
  }
  return p;
}

std::vector<HierarchyViolation> validate_hierarchy(const HierarchyPattern& p) {
  std::vector<HierarchyViolation> out;
  const int levels = static_cast<int>(p.traits.size());
  if (levels < 1) {
    out.push_back({0, 0, "hierarchy needs at least one level"});
    return out;
  }
  for (int k = 0; k < levels; ++k)
    if (p.traits[k] < 1) out.push_back({k + 1, 0, "level has no traits"});
  if (!out.empty()) return out;
  if (static_cast<int>(p.pattern.size()) != levels - 1) {
    out.push_back({0, 0, "loading pattern must list every level below the top"});
    return out;
  }
  for (int k = 0; k + 1 < levels; ++k) {
    const auto& m = p.pattern[k];
    if (m.rows() != p.traits[k] || m.cols() != p.traits[k + 1]) {
      out.push_back({k + 1, 0, "loading pattern shape differs from the trait counts"});
      continue;
    }
    for (int q = 0; q < p.traits[k]; ++q) {
      const auto nonnull = m.row(q).count();
      if (nonnull == 0) out.push_back({k + 1, q + 1, "row has no non-null loading"});
      if (nonnull > 1) out.push_back({k + 1, q + 1, "row has two non-null loadings"});
    }
  }
  if (!out.empty()) return out;
  for (int k = 1; k < levels; ++k)
    for (int q = 0; q < p.traits[k]; ++q)
      if (p.pattern[k - 1].col(q).count() < 3) out.push_back({k + 1, q + 1, "fewer than three children"});
  return out;
}

HierarchySpec hierarchy_from_pattern(const HierarchyPattern& p) {
  throw_violations(validate_hierarchy(p));
  HierarchySpec spec;
  spec.traits = p.traits;
  for (const auto& m : p.pattern) {
    std::vector<int> parent(m.rows());
    for (Eigen::Index q = 0; q < m.rows(); ++q)
      for (Eigen::Index r = 0; r < m.cols(); ++r)
        if (m(q, r)) parent[q] = static_cast<int>(r);
    spec.parent.push_back(std::move(parent));
  }
  return spec;
}

void validate_loadings(const HierarchySpec& spec, const Loadings& loadings) {
  if (static_cast<int>(loadings.size()) != spec.levels() - 1) throw InputError("loadings: wrong number of levels");
  for (int k = 0; k + 1 < spec.levels(); ++k) {
    if (loadings[k].size() != spec.traits[k]) throw InputError("loadings: level " + std::to_string(k + 1) + " size");
    for (Eigen::Index q = 0; q < loadings[k].size(); ++q)
      if (!(std::abs(loadings[k](q)) < 1.0))
        throw InputError("loadings: |lambda| must be < 1 (level " + std::to_string(k + 1) + ", trait " +
                         std::to_string(q + 1) + ")");
  }
}

Loadings constant_loadings(const HierarchySpec& spec, double value) {
  Loadings out;
  for (int k = 0; k + 1 < spec.levels(); ++k) out.push_back(Vector::Constant(spec.traits[k], value));
  return out;
}

Loadings error_scales(const Loadings& loadings) {
  Loadings out;
  for (const auto& l : loadings) out.push_back((1.0 - l.array().square()).sqrt().matrix());
  return out;
}

LatentState sample_prior_traits(const HierarchySpec& spec, const Loadings& loadings, int subjects, Rng& rng) {
  require_valid_hierarchy(spec);
  validate_loadings(spec, loadings);
  const int top = spec.levels() - 1;
  LatentState s = LatentState::zeros(spec, subjects);
  const Loadings tau = error_scales(loadings);
  for (int j = 0; j < subjects; ++j) {
    for (int q = 0; q < spec.traits[top]; ++q) s.theta[top](q, j) = rng.normal();
    for (int k = top - 1; k >= 0; --k)
      for (int q = 0; q < spec.traits[k]; ++q)
        s.theta[k](q, j) = loadings[k](q) * s.theta[k + 1](spec.parent[k][q], j) + tau[k](q) * rng.normal();
  }
  return s;
}

double conditional_trait_logdensity(double child, double parent, double lambda) {
  if (!(std::abs(lambda) < 1.0)) throw std::domain_error("conditional_trait_logdensity: |lambda| must be < 1");
  const double var = 1.0 - lambda * lambda;
  const double r = child - lambda * parent;
  return -0.5 * r * r / var - 0.5 * std::log(var) - kLogSqrt2Pi;
}

double prior_trait_logdensity(const HierarchySpec& spec, const Loadings& loadings, const Vector& stacked) {
  const int top = spec.levels() - 1;
  double total = 0.0;
  for (int q = 0; q < spec.traits[top]; ++q) total += normal_logpdf(stacked(spec.offset(top) + q));
  for (int k = 0; k < top; ++k)
    for (int q = 0; q < spec.traits[k]; ++q)
      total += conditional_trait_logdensity(stacked(spec.offset(k) + q),
                                            stacked(spec.offset(k + 1) + spec.parent[k][q]), loadings[k](q));
  return total;
}

std::vector<MarginalMoments> check_marginal_scale(const HierarchySpec& spec, const Loadings& loadings, int draws,
                                                  Rng& rng) {
  if (draws < 2) throw InputError("check_marginal_scale: need at least two draws");
  const LatentState s = sample_prior_traits(spec, loadings, draws, rng);
  std::vector<MarginalMoments> out;
  const double n = draws;
  for (int k = 0; k < spec.levels(); ++k) {
    for (int q = 0; q < spec.traits[k]; ++q) {
      const auto x = s.theta[k].row(q).array();
      const double mean = x.mean();
      const auto centered = x - mean;
      const double m2 = centered.square().sum() / (n - 1.0);
      const double m4 = centered.square().square().mean();
      out.push_back({k, q, mean, m2, std::sqrt(m2 / n), std::sqrt(std::max(m4 - m2 * m2, 0.0) / n)});
    }
  }
  return out;
}

std::vector<Vector> implied_marginal_variance(const HierarchySpec& spec, const Loadings& loadings) {
  const int top = spec.levels() - 1;
  std::vector<Vector> var(spec.levels());
  var[top] = Vector::Ones(spec.traits[top]);
  for (int k = top - 1; k >= 0; --k) {
    var[k].resize(spec.traits[k]);
    for (int q = 0; q < spec.traits[k]; ++q) {
      const double l = loadings[k](q);
      var[k](q) = l * l * var[k + 1](spec.parent[k][q]) + (1.0 - l * l);
    }
  }
  return var;
}

}  // namespace hiermirt
