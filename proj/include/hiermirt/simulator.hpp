#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hiermirt/model.hpp"

namespace hiermirt {

enum class GuessingMode { zero, uniform, fixed };

struct CrossLoading {
  int item;   ///< 0-based position in the generated bank
  int trait;  ///< 0-based extra level-1 trait
};

struct GradedBlock {
  int trait;       ///< primary level-1 trait
  int count;       ///< number of graded items
  int categories;  ///< M, >= 2
};

/// Distributions used for item parameters that are not fixed by hand.
struct ItemGeneration {
  double a_min = 0.7;
  double a_max = 1.3;
  double b_sd = 1.0;
  double threshold_sd = 1.5;
  double threshold_min_gap = 0.3;
};

/// A synthetic study: the generating model plus how it should be fitted.
struct SimulationDesign {
  int id = 0;
  std::string name;
  HierarchySpec hierarchy;
  Loadings true_lambda;
  int subjects = 0;
  std::vector<int> dichotomous_per_trait;
  std::vector<GradedBlock> graded;
  std::vector<CrossLoading> cross_loadings;
  GuessingMode guessing = GuessingMode::zero;
  double guessing_value = 0.0;  ///< upper bound (uniform) or the value (fixed)
  ItemGeneration generation;
  double missing_rate = 0.0;
  bool echelon = false;
  bool fix_items_at_truth = false;
  /// When set, the fitted model holds lambda at these values (independent-traits fit).
  std::optional<Loadings> fit_fixed_lambda;

  int item_count() const;
};

void validate_design(const SimulationDesign& design);

/// The eight designs of the simulation study (ids 1..8).
SimulationDesign preset_design(int id);

struct SimulationTruth {
  LatentState traits;
  ItemBank items;
  Loadings lambda;
};

struct SimulatedData {
  ResponseMatrix responses;
  SimulationTruth truth;
};

/// Item structure (kinds, loading sets, guessing flags) of a design.
std::vector<ItemSpec> design_item_specs(const SimulationDesign& design);

/// Draws traits, item parameters and responses; identical seeds give identical data.
SimulatedData simulate_dataset(const SimulationDesign& design, std::uint64_t seed);

}  // namespace hiermirt
