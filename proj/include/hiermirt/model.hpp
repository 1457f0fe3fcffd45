#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiermirt/normal.hpp"

namespace hiermirt {

/// Bad user-facing input: shapes, ranges, file contents.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A linear-algebra or sampling failure that cannot happen for valid inputs.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using ByteMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Latent hierarchy

/// Tree of latent traits. Level 0 is measured by the items, the last level
/// is the most general. Every trait below the top has exactly one parent.
struct HierarchySpec {
  std::vector<int> traits;               ///< Q_k per level
  std::vector<std::vector<int>> parent;  ///< parent[k][q] indexes level k+1 (k < levels-1)

  int levels() const { return static_cast<int>(traits.size()); }
  int total_traits() const;
  /// Position of level k in a subject's stacked trait vector (level 0 first).
  int offset(int level) const;
  int children_of(int level, int trait) const;

  static HierarchySpec single_level(int q);
  /// Two levels: q level-1 traits all under one general trait.
  static HierarchySpec two_level(int q);
};

/// Loading of each child trait on its unique parent; loadings[k][q] links
/// trait q of level k to parent[k][q] of level k+1.
using Loadings = std::vector<Vector>;

/// theta[k] is Q_k x J (column j = subject j).
struct LatentState {
  std::vector<Matrix> theta;

  int subjects() const { return theta.empty() ? 0 : static_cast<int>(theta.front().cols()); }
  Vector stacked(int subject) const;
  void set_stacked(int subject, const Vector& values);

  static LatentState zeros(const HierarchySpec& spec, int subjects);
};

// ---------------------------------------------------------------------------
// Items

enum class ItemKind { dichotomous, graded };

struct ItemSpec {
  std::string name;
  ItemKind kind = ItemKind::dichotomous;
  int categories = 2;      ///< M_i; always 2 for dichotomous items
  std::vector<int> loads;  ///< free level-1 traits, sorted, identifiability zeros removed
  std::vector<int> zeros;  ///< declared loadings held at zero for identifiability
  bool guessing = false;   ///< pseudo-guessing estimated (dichotomous only)
};

/// Item structure and current parameter values. Rows of `a` are zero
/// outside each item's loading set; `b`, `c` are unused for graded items and
/// `thresholds` is empty for dichotomous items.
struct ItemBank {
  std::vector<ItemSpec> specs;
  Matrix a;  ///< I x Q_1
  Vector b;
  Vector c;
  std::vector<Vector> thresholds;

  int size() const { return static_cast<int>(specs.size()); }
  int level1_traits() const { return static_cast<int>(a.cols()); }
  bool is_graded(int i) const { return specs[i].kind == ItemKind::graded; }

  /// Zero-initialized bank of the given structure (thresholds spread over [-1, 1]).
  static ItemBank from_specs(std::vector<ItemSpec> specs, int level1_traits);
};

/// Removes a_{iq}, q > i, from the first Q_1 - 1 items' loading sets.
void apply_echelon_restriction(std::vector<ItemSpec>& specs, int level1_traits);

/// Throws InputError when any loading index, category count or parameter
/// violates the item invariants.
void validate_items(const ItemBank& items);

/// True when `a` is exactly zero off every loading set and thresholds are ordered.
bool item_structure_holds(const ItemBank& items);

// ---------------------------------------------------------------------------
// Responses

inline constexpr int kMissing = -1;

/// I x J cells: kMissing, 0/1 for dichotomous items, 0..M_i-1 for graded items.
struct ResponseMatrix {
  IntMatrix cells;

  int items() const { return static_cast<int>(cells.rows()); }
  int subjects() const { return static_cast<int>(cells.cols()); }
  bool observed(int i, int j) const { return cells(i, j) != kMissing; }
};

/// Checks category ranges and that every item and subject has an observation.
void validate_responses(const ResponseMatrix& responses, const ItemBank& items);

// ---------------------------------------------------------------------------
// Augmented model state shared by the sampler and the oracle.

/// latent(i, j) is X_ij for dichotomous rows and X^G_ij for graded rows
/// (0 when unobserved or guessed); guessed(i, j) is Z_ij.
struct AugmentedState {
  Matrix latent;
  ByteMatrix guessed;
};

struct ModelState {
  LatentState traits;
  Loadings lambda;
  ItemBank items;
  AugmentedState augmented;
};

/// Hyperparameters of the item and guessing priors.
struct Priors {
  Vector ab_mean;     ///< length Q_1 + 1, last entry for b
  Matrix ab_cov;
  Vector ag_mean;     ///< length Q_1
  Matrix ag_cov;
  double c_alpha = 1.0;
  double c_beta = 4.0;

  /// Means (1, ..., 1, 0) and (1, ..., 1); covariances scale * I.
  static Priors defaults(int level1_traits, double cov_scale = 4.0);
};

// ---------------------------------------------------------------------------
// Response probabilities

/// c + (1 - c) Phi(a . theta1 - b).
template <class DerivedA, class DerivedT>
typename DerivedA::Scalar prob_correct(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedT>& theta1,
                                       typename DerivedA::Scalar b, typename DerivedA::Scalar c) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != theta1.size()) throw InputError("prob_correct: dimension mismatch");
  const Scalar eta = a.dot(theta1) - b;
  if (!std::isfinite(eta) || !std::isfinite(c)) throw InputError("prob_correct: non-finite input");
  if (!(c >= Scalar(0) && c < Scalar(1))) throw InputError("prob_correct: guessing must lie in [0, 1)");
  return c + (Scalar(1) - c) * normal_cdf(eta);
}

/// Linear-predictor form of prob_correct.
double prob_correct_linear(double eta, double c);

/// Graded-response category probabilities for the linear predictor eta.
/// Entry m is Phi(b_m - eta) - Phi(b_{m-1} - eta), b_0 = -inf, b_M = inf.
Vector grm_category_probs(double eta, const Vector& thresholds);

template <class DerivedA, class DerivedT>
Vector grm_category_probs(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedT>& theta1,
                          const Vector& thresholds) {
  if (a.size() != theta1.size()) throw InputError("grm_category_probs: dimension mismatch");
  return grm_category_probs(a.dot(theta1), thresholds);
}

/// log P(Y = score) under the graded model; -inf for impossible scores.
double grm_log_prob(int score, double eta, const Vector& thresholds);

/// Interval (b_{m-1}, b_m) of the latent response producing score m.
std::pair<double, double> grm_interval(int score, const Vector& thresholds);

bool strictly_increasing(const Vector& v);

// ---------------------------------------------------------------------------
// Log-likelihoods over observed cells. Impossible observations yield -inf.

double loglik_dichotomous(const ResponseMatrix& responses, const ItemBank& items, const Matrix& theta1);
double loglik_graded(const ResponseMatrix& responses, const ItemBank& items, const Matrix& theta1);

/// Collapsed likelihood contribution of one graded item at candidate thresholds.
double loglik_graded_item(std::span<const int> scores, const Vector& eta, const Vector& thresholds);

// ---------------------------------------------------------------------------
// Threshold lattice

/// Spacing of the dyadic lattice on which thresholds live; sums and
/// differences of lattice values with |x| < 2^12 are exact in double.
inline constexpr double kThresholdQuantum = 0x1.0p-40;

double snap_threshold(double x);
Vector snap_thresholds(const Vector& thresholds);

}  // namespace hiermirt
