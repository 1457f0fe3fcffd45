#include "hiermirt/simulator.hpp"

#include <algorithm>

#include "hiermirt/hierarchy.hpp"
#include "hiermirt/random.hpp"

namespace hiermirt {

namespace {

enum SimulationStream : std::uint32_t { kTraitStream = 1, kItemStream = 2, kResponseStream = 3, kMissingStream = 4 };

Loadings level1_loadings(std::initializer_list<double> values) {
  return {Eigen::Map<const Vector>(values.begin(), static_cast<Eigen::Index>(values.size()))};
}

SimulationDesign base_design(int id, int subjects) {
  SimulationDesign d;
  d.id = id;
  d.name = "simulation " + std::to_string(id);
  d.hierarchy = HierarchySpec::two_level(4);
  d.true_lambda = level1_loadings({0.95, 0.90, 0.85, 0.80});
  d.subjects = subjects;
  d.dichotomous_per_trait = {45, 45, 45, 45};
  return d;
}

Vector draw_thresholds(int categories, const ItemGeneration& gen, Rng& rng) {
  Vector t(categories - 1);
  for (;;) {
    for (Eigen::Index m = 0; m < t.size(); ++m) t(m) = gen.threshold_sd * rng.normal();
    std::sort(t.data(), t.data() + t.size());
    bool ok = true;
    for (Eigen::Index m = 1; m < t.size(); ++m) ok = ok && (t(m) - t(m - 1) >= gen.threshold_min_gap);
    if (ok) return snap_thresholds(t);
  }
}

}  // namespace

int SimulationDesign::item_count() const {
  int n = 0;
  for (int c : dichotomous_per_trait) n += c;
  for (const auto& g : graded) n += g.count;
  return n;
}

void validate_design(const SimulationDesign& d) {
  require_valid_hierarchy(d.hierarchy);
  validate_loadings(d.hierarchy, d.true_lambda);
  const int q1 = d.hierarchy.traits[0];
  if (d.subjects < 1) throw InputError("design: subjects must be positive");
  if (static_cast<int>(d.dichotomous_per_trait.size()) != q1)
    throw InputError("design: dichotomous_per_trait needs one count per level-1 trait");
  for (const auto& g : d.graded) {
    if (g.trait < 0 || g.trait >= q1) throw InputError("design: graded block on unknown trait");
    if (g.categories < 2 || g.count < 0) throw InputError("design: graded block needs >= 2 categories");
  }
  const int items = d.item_count();
  if (items < 1) throw InputError("design: no items");
  for (const auto& x : d.cross_loadings)
    if (x.item < 0 || x.item >= items || x.trait < 0 || x.trait >= q1)
      throw InputError("design: cross-loading references an unknown item or trait");
  if (d.guessing == GuessingMode::uniform && !(d.guessing_value > 0.0 && d.guessing_value < 1.0))
    throw InputError("design: uniform guessing bound must lie in (0, 1)");
  if (d.guessing == GuessingMode::fixed && !(d.guessing_value >= 0.0 && d.guessing_value < 1.0))
    throw InputError("design: fixed guessing must lie in [0, 1)");
  if (!(d.missing_rate >= 0.0 && d.missing_rate < 1.0)) throw InputError("design: missing_rate must lie in [0, 1)");
  if (d.fit_fixed_lambda) validate_loadings(d.hierarchy, *d.fit_fixed_lambda);
}

SimulationDesign preset_design(int id) {
  switch (id) {
    case 1: return base_design(1, 500);
    case 2: return base_design(2, 2000);
    case 3: return base_design(3, 5000);
    case 4: {
      auto d = base_design(4, 5000);
      d.fix_items_at_truth = true;
      d.fit_fixed_lambda = level1_loadings({0.0, 0.0, 0.0, 0.0});
      return d;
    }
    case 5: {
      auto d = base_design(5, 5000);
      d.true_lambda = level1_loadings({0.0, 0.0, 0.0, 0.0});
      d.fix_items_at_truth = true;
      return d;
    }
    case 6: {
      // Unidimensional data; lambda = 1 is outside the open prior support.
      auto d = base_design(6, 5000);
      d.true_lambda = level1_loadings({0.999, 0.999, 0.999, 0.999});
      d.fix_items_at_truth = true;
      return d;
    }
    case 7: {
      auto d = base_design(7, 5000);
      d.fix_items_at_truth = true;
      return d;
    }
    case 8: {
      SimulationDesign d;
      d.id = 8;
      d.name = "simulation 8";
      d.hierarchy = HierarchySpec::two_level(5);
      d.true_lambda = level1_loadings({0.95, 0.90, 0.85, 0.80, 0.75});
      d.subjects = 10000;
      d.dichotomous_per_trait = {45, 45, 45, 45, 0};
      d.graded = {GradedBlock{4, 5, 5}};
      for (int k = 0; k < 5; ++k) d.cross_loadings.push_back({45 + k, 0});
      for (int k = 0; k < 5; ++k) d.cross_loadings.push_back({90 + k, 0});
      for (int k = 0; k < 6; ++k) d.cross_loadings.push_back({135 + k, 0});
      d.cross_loadings.push_back({180, 0});
      d.guessing = GuessingMode::uniform;
      d.guessing_value = 0.2;
      d.echelon = true;
      return d;
    }
    default: throw InputError("preset id must be in 1..8, got " + std::to_string(id));
  }
}

std::vector<ItemSpec> design_item_specs(const SimulationDesign& d) {
  std::vector<ItemSpec> specs;
  const int q1 = d.hierarchy.traits[0];
  for (int q = 0; q < q1; ++q)
    for (int n = 0; n < d.dichotomous_per_trait[q]; ++n) {
      ItemSpec s;
      s.kind = ItemKind::dichotomous;
      s.loads = {q};
      s.guessing = d.guessing != GuessingMode::zero;
      specs.push_back(std::move(s));
    }
  for (const auto& g : d.graded)
    for (int n = 0; n < g.count; ++n) {
      ItemSpec s;
      s.kind = ItemKind::graded;
      s.categories = g.categories;
      s.loads = {g.trait};
      specs.push_back(std::move(s));
    }
  for (const auto& x : d.cross_loadings) {
    auto& loads = specs[x.item].loads;
    if (std::find(loads.begin(), loads.end(), x.trait) == loads.end()) loads.push_back(x.trait);
    std::sort(loads.begin(), loads.end());
  }
  for (std::size_t i = 0; i < specs.size(); ++i) specs[i].name = "item_" + std::to_string(i + 1);
  if (d.echelon) apply_echelon_restriction(specs, q1);
  return specs;
}

SimulatedData simulate_dataset(const SimulationDesign& design, std::uint64_t seed) {
  validate_design(design);
  const StreamFactory streams(seed, 0);
  const auto& spec = design.hierarchy;
  const int subjects = design.subjects;

  SimulatedData out;
  auto& truth = out.truth;
  truth.lambda = design.true_lambda;
  truth.traits = LatentState::zeros(spec, subjects);
  for (int j = 0; j < subjects; ++j) {
    Rng rng = streams.stream(kTraitStream, static_cast<std::uint64_t>(j));
    const LatentState one = sample_prior_traits(spec, design.true_lambda, 1, rng);
    truth.traits.set_stacked(j, one.stacked(0));
  }

  truth.items = ItemBank::from_specs(design_item_specs(design), spec.traits[0]);
  auto& items = truth.items;
  const auto& gen = design.generation;
  for (int i = 0; i < items.size(); ++i) {
    Rng rng = streams.stream(kItemStream, static_cast<std::uint64_t>(i));
    for (int q : items.specs[i].loads) items.a(i, q) = gen.a_min + (gen.a_max - gen.a_min) * rng.uniform();
    if (items.is_graded(i)) {
      items.thresholds[i] = draw_thresholds(items.specs[i].categories, gen, rng);
    } else {
      items.b(i) = gen.b_sd * rng.normal();
      if (design.guessing == GuessingMode::uniform) items.c(i) = design.guessing_value * rng.uniform();
      if (design.guessing == GuessingMode::fixed) items.c(i) = design.guessing_value;
    }
  }

  const Matrix& theta1 = truth.traits.theta[0];
  out.responses.cells = IntMatrix::Zero(items.size(), subjects);
  for (int i = 0; i < items.size(); ++i) {
    Rng rng = streams.stream(kResponseStream, static_cast<std::uint64_t>(i));
    Rng miss = streams.stream(kMissingStream, static_cast<std::uint64_t>(i));
    for (int j = 0; j < subjects; ++j) {
      const double eta = items.a.row(i).dot(theta1.col(j));
      int y;
      if (items.is_graded(i)) {
        const Vector p = grm_category_probs(eta, items.thresholds[i]);
        const double u = rng.uniform();
        double acc = 0.0;
        y = static_cast<int>(p.size()) - 1;
        for (Eigen::Index m = 0; m < p.size(); ++m) {
          acc += p(m);
          if (u < acc) {
            y = static_cast<int>(m);
            break;
          }
        }
      } else {
        y = rng.uniform() < prob_correct_linear(eta - items.b(i), items.c(i)) ? 1 : 0;
      }
      if (design.missing_rate > 0.0 && miss.uniform() < design.missing_rate) y = kMissing;
      out.responses.cells(i, j) = y;
    }
  }
  return out;
}

}  // namespace hiermirt
