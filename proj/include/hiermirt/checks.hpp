#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hiermirt::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Monte Carlo sizes; the defaults are the full-strength settings.
struct CheckScale {
  int marginal_draws = 100000;
  long augmentation_draws = 1000000;
  int theta_draws = 100000;
  long mh_iterations = 200000;
  int lattice_trials = 10000;
  int smoke_iterations = 500;
  int smoke_subjects = 200;

  static CheckScale quick();
};

/// Prior marginals of a 3-level tree: means within 0.02 of 0, variances within 0.03 of 1.
CheckResult marginal_scale(const CheckScale& scale, std::uint64_t seed);

/// P(Y = 1) reconstructed from the augmented model on a 5 x 5 (m, c) grid, within 3 MC-SE.
CheckResult augmentation_equivalence(const CheckScale& scale, std::uint64_t seed);

/// Gibbs theta marginal for one subject with 5 fixed items against the grid posterior.
CheckResult theta_grid_agreement(const CheckScale& scale, std::uint64_t seed);

/// Conjugate blocks: conditional minus log joint constant (spread <= 1e-8);
/// MH blocks: stationary histogram against the grid (TV <= 0.05).
std::vector<CheckResult> conditional_correctness(const CheckScale& scale, std::uint64_t seed);

/// reparam_b round trip is bit-exact on random ordered lattice vectors.
CheckResult lattice_round_trip(const CheckScale& scale, std::uint64_t seed);

/// Threshold ordering and identifiability zeros after every sweep of a short chain.
CheckResult structural_smoke_chain(const CheckScale& scale, std::uint64_t seed);

/// Everything above, in order.
std::vector<CheckResult> oracle_suite(const CheckScale& scale, std::uint64_t seed);

}  // namespace hiermirt::checks
