#include "hiermirt/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>

#include "hiermirt/chain.hpp"
#include "hiermirt/diagnostics.hpp"
#include "hiermirt/hierarchy.hpp"
#include "hiermirt/oracle.hpp"
#include "hiermirt/sampler.hpp"
#include "hiermirt/simulator.hpp"

namespace hiermirt::checks {

namespace {

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

/// Half the L1 distance between binned draws and binned grid mass.
double binned_tv(const std::vector<double>& draws, const oracle::GridPosterior& grid, int bins) {
  const Vector& axis = grid.axes[0];
  const double lo = axis(0), hi = axis(axis.size() - 1);
  const auto bin_of = [&](double x) {
    const int b = static_cast<int>(std::floor((x - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
  };
  Vector expected = Vector::Zero(bins);
  for (Eigen::Index k = 0; k < axis.size(); ++k) expected(bin_of(axis(k))) += grid.weight(k) * grid.density(k);
  expected /= expected.sum();
  Vector observed = Vector::Zero(bins);
  for (double x : draws) observed(bin_of(x)) += 1.0;
  observed /= static_cast<double>(draws.size());
  return 0.5 * (observed - expected).cwiseAbs().sum();
}

/// Grid window mean +- 6 sd of a unimodal log density first evaluated on a wide axis.
oracle::GridPosterior refine(const std::function<double(double)>& logd, double lo, double hi, int points) {
  Vector axis = Vector::LinSpaced(points, lo, hi);
  Vector vals(points);
  for (int k = 0; k < points; ++k) vals(k) = logd(axis(k));
  const auto wide = oracle::grid_from_log_density(axis, vals);
  const double m = wide.mean()(0);
  const double sd = std::sqrt(wide.covariance()(0, 0));
  axis = Vector::LinSpaced(points, std::max(lo, m - 6 * sd), std::min(hi, m + 6 * sd));
  for (int k = 0; k < points; ++k) vals(k) = logd(axis(k));
  return oracle::grid_from_log_density(axis, vals);
}

struct SliceStats {
  double spread = 0.0;
  int finite = 0;
};

SliceStats difference_spread(const std::vector<double>& a, const std::vector<double>& b) {
  double lo = kInf, hi = -kInf;
  SliceStats s;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a[k]) || !std::isfinite(b[k])) continue;
    const double d = a[k] - b[k];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    ++s.finite;
  }
  s.spread = s.finite ? hi - lo : kInf;
  return s;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = lo + (hi - lo) * k / (n - 1);
  return g;
}

SimulationDesign small_design() {
  SimulationDesign d;
  d.id = 0;
  d.name = "conditional check";
  d.hierarchy = HierarchySpec::two_level(3);
  d.true_lambda = {(Vector(3) << 0.8, 0.7, 0.6).finished()};
  d.subjects = 6;
  d.dichotomous_per_trait = {2, 2, 2};
  d.graded = {GradedBlock{1, 2, 4}};
  d.cross_loadings = {{1, 1}, {3, 2}, {6, 0}};
  d.guessing = GuessingMode::uniform;
  d.guessing_value = 0.3;
  return d;
}

}  // namespace

CheckScale CheckScale::quick() {
  CheckScale s;
  s.marginal_draws = 20000;
  s.augmentation_draws = 100000;
  s.theta_draws = 20000;
  s.mh_iterations = 60000;
  s.lattice_trials = 10000;
  s.smoke_iterations = 100;
  s.smoke_subjects = 100;
  return s;
}

CheckResult marginal_scale(const CheckScale& scale, std::uint64_t seed) {
  CheckResult r{"marginal scale of the hierarchical prior", true, ""};
  HierarchySpec spec;
  spec.traits = {9, 3, 1};
  spec.parent = {{0, 0, 0, 1, 1, 1, 2, 2, 2}, {0, 0, 0}};
  double worst_mean = 0.0, worst_var = 0.0;
  const StreamFactory streams(seed, 0);
  int config = 0;
  for (double value : {0.95, 0.8, -1.0}) {
    Loadings l = constant_loadings(spec, value);
    if (value < 0.0) {
      // alternate 0.95 / 0.8 through the tree
      for (auto& level : l)
        for (Eigen::Index q = 0; q < level.size(); ++q) level(q) = (q % 2 == 0) ? 0.95 : 0.8;
    }
    Rng rng = streams.stream(1, static_cast<std::uint64_t>(config++));
    for (const auto& m : check_marginal_scale(spec, l, scale.marginal_draws, rng)) {
      worst_mean = std::max(worst_mean, std::abs(m.mean));
      worst_var = std::max(worst_var, std::abs(m.variance - 1.0));
    }
  }
  r.passed = worst_mean <= 0.02 && worst_var <= 0.03;
  r.detail = "max |mean| " + fmt(worst_mean) + " (<= 0.02), max |var - 1| " + fmt(worst_var) + " (<= 0.03)";
  return r;
}

CheckResult augmentation_equivalence(const CheckScale& scale, std::uint64_t seed) {
  CheckResult r{"augmentation equivalence", true, ""};
  const StreamFactory streams(seed, 0);
  double worst = 0.0;
  int cell = 0;
  for (double m : {-2.0, -1.0, 0.0, 1.0, 2.0})
    for (double c : {0.0, 0.1, 0.2, 0.3, 0.4}) {
      Rng rng = streams.stream(2, static_cast<std::uint64_t>(cell++));
      const auto a = oracle::augmentation_marginal_check(m, c, scale.augmentation_draws, rng);
      const double z = std::abs(a.empirical - a.analytic) / a.mc_se;
      worst = std::max(worst, z);
      if (z > 3.0) r.passed = false;
    }
  r.detail = "max |empirical - analytic| / MC-SE = " + fmt(worst) + " over 25 cells (<= 3)";
  return r;
}

CheckResult theta_grid_agreement(const CheckScale& scale, std::uint64_t seed) {
  CheckResult r{"Gibbs theta vs grid posterior", true, ""};
  const HierarchySpec spec = HierarchySpec::single_level(1);
  std::vector<ItemSpec> specs(5);
  const double a[] = {1.0, 0.8, 1.5, 1.2, 0.6};
  const double b[] = {-0.5, 0.0, 0.5, 1.0, -1.0};
  const double c[] = {0.0, 0.2, 0.0, 0.15, 0.0};
  const int y[] = {1, 0, 1, 1, 0};
  for (int i = 0; i < 5; ++i) {
    specs[i].name = "item_" + std::to_string(i + 1);
    specs[i].loads = {0};
    specs[i].guessing = c[i] > 0.0;
  }
  ModelInputs in;
  in.hierarchy = spec;
  in.items = ItemBank::from_specs(specs, 1);
  in.responses.cells = IntMatrix::Zero(5, 1);
  std::vector<int> scores;
  for (int i = 0; i < 5; ++i) {
    in.items.a(i, 0) = a[i];
    in.items.b(i) = b[i];
    in.items.c(i) = c[i];
    in.responses.cells(i, 0) = y[i];
    scores.push_back(y[i]);
  }
  in.items_initialized = true;

  SamplerConfig cfg;
  cfg.seed = seed;
  cfg.burnin = 1000;
  cfg.iterations = cfg.burnin + scale.theta_draws;
  cfg.sample_items = false;
  cfg.trace_theta_subjects = 1;
  const auto trace = run_chain(in, cfg);
  const Vector draws = trace.group("theta")->draws.col(0);
  const auto gibbs = summarize(draws);

  const auto grid = oracle::grid_posterior_theta(spec, {}, in.items, scores);
  const double gm = grid.mean()(0);
  const double gsd = std::sqrt(grid.covariance()(0, 0));
  const double dmean = std::abs(gibbs.mean - gm);
  const double ratio = gibbs.sd / gsd;
  r.passed = dmean <= 0.02 && std::abs(ratio - 1.0) <= 0.05;
  r.detail = "mean " + fmt(gibbs.mean) + " vs " + fmt(gm) + " (|diff| " + fmt(dmean) + " <= 0.02), sd ratio " +
             fmt(ratio) + " (within 0.05 of 1)";
  return r;
}

std::vector<CheckResult> conditional_correctness(const CheckScale& scale, std::uint64_t seed) {
  std::vector<CheckResult> out;
  const auto design = small_design();
  const auto data = simulate_dataset(design, seed);
  ModelInputs in;
  in.hierarchy = design.hierarchy;
  in.items = data.truth.items;
  in.items_initialized = true;
  in.responses = data.responses;
  SamplerConfig cfg;
  cfg.seed = seed;
  cfg.iterations = 30;
  GibbsSampler sampler(in, cfg);
  for (int it = 0; it < 30; ++it) sampler.sweep(it);
  const ModelState& st = sampler.state();
  const auto& spec = in.hierarchy;
  const auto& prior = sampler.priors();
  constexpr int kGrid = 50;
  constexpr double kSpread = 1e-8;

  const auto conjugate = [&](const std::string& name, auto&& run_all) {
    double worst = 0.0;
    int slices = 0;
    run_all([&](const oracle::SliceTarget& t, const std::vector<double>& grid, auto&& conditional) {
      const auto joint = oracle::logjoint_block_slice(spec, st, prior, in.responses, t, grid);
      std::vector<double> cond;
      for (double v : grid) cond.push_back(conditional(v));
      const auto s = difference_spread(cond, joint);
      worst = std::max(worst, s.finite >= kGrid / 2 ? s.spread : kInf);
      ++slices;
    });
    out.push_back({name + " conditional vs log joint", worst <= kSpread,
                   "max spread " + fmt(worst) + " over " + std::to_string(slices) + " slices (<= 1e-8)"});
  };

  conjugate("c", [&](auto&& slice) {
    for (int i = 0; i < st.items.size(); ++i) {
      if (st.items.is_graded(i)) continue;
      const auto beta = sampler.c_conditional(i);
      oracle::SliceTarget t;
      t.block = oracle::SliceBlock::c;
      t.item = i;
      slice(t, linspace(0.02, 0.98, kGrid), [&](double v) { return beta.log_density(v); });
    }
  });

  conjugate("(a, b)", [&](auto&& slice) {
    for (int i = 0; i < st.items.size(); ++i) {
      if (st.items.is_graded(i)) continue;
      const auto g = sampler.ab_conditional(i);
      const auto& loads = st.items.specs[i].loads;
      Vector current(static_cast<Eigen::Index>(loads.size() + 1));
      for (std::size_t n = 0; n < loads.size(); ++n) current(static_cast<Eigen::Index>(n)) = st.items.a(i, loads[n]);
      current(current.size() - 1) = st.items.b(i);
      for (Eigen::Index k = 0; k < current.size(); ++k) {
        oracle::SliceTarget t;
        t.block = oracle::SliceBlock::ab;
        t.item = i;
        t.index = static_cast<int>(k);
        slice(t, linspace(current(k) - 2.0, current(k) + 2.0, kGrid), [&](double v) {
          Vector x = current;
          x(k) = v;
          return g.log_density(x);
        });
      }
    }
  });

  conjugate("a^G", [&](auto&& slice) {
    for (int i = 0; i < st.items.size(); ++i) {
      if (!st.items.is_graded(i)) continue;
      const auto g = sampler.ag_conditional(i);
      const auto& loads = st.items.specs[i].loads;
      Vector current(static_cast<Eigen::Index>(loads.size()));
      for (std::size_t n = 0; n < loads.size(); ++n) current(static_cast<Eigen::Index>(n)) = st.items.a(i, loads[n]);
      for (Eigen::Index k = 0; k < current.size(); ++k) {
        oracle::SliceTarget t;
        t.block = oracle::SliceBlock::ag;
        t.item = i;
        t.index = static_cast<int>(k);
        slice(t, linspace(current(k) - 2.0, current(k) + 2.0, kGrid), [&](double v) {
          Vector x = current;
          x(k) = v;
          return g.log_density(x);
        });
      }
    }
  });

  conjugate("theta (K = 2)", [&](auto&& slice) {
    for (int j = 0; j < st.traits.subjects(); ++j) {
      const auto cond = sampler.theta_conditional(j);
      const Vector current = st.traits.stacked(j);
      for (Eigen::Index k = 0; k < current.size(); ++k) {
        oracle::SliceTarget t;
        t.block = oracle::SliceBlock::theta;
        t.subject = j;
        t.index = static_cast<int>(k);
        slice(t, linspace(current(k) - 2.0, current(k) + 2.0, kGrid), [&](double v) {
          Vector x = current;
          x(k) = v;
          return cond.log_density(x);
        });
      }
    }
  });

  conjugate("lambda density", [&](auto&& slice) {
    for (int q = 0; q < spec.traits[0]; ++q) {
      const Vector child = st.traits.theta[0].row(q).transpose();
      const Vector parent = st.traits.theta[1].row(spec.parent[0][q]).transpose();
      oracle::SliceTarget t;
      t.block = oracle::SliceBlock::lambda;
      t.level = 0;
      t.trait = q;
      slice(t, linspace(-0.95, 0.95, kGrid), [&](double v) { return lambda_log_conditional(v, child, parent); });
    }
  });

  // MH: lambda stationary histogram
  {
    Rng data_rng = StreamFactory(seed, 0).stream(3, 0);
    const int n = 30;
    Vector parent(n), child(n);
    for (int j = 0; j < n; ++j) {
      parent(j) = data_rng.normal();
      child(j) = 0.6 * parent(j) + 0.8 * data_rng.normal();
    }
    const auto grid = refine(
        [&](double l) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += conditional_trait_logdensity(child(j), parent(j), l);
          return s;
        },
        -0.9995, 0.9995, 2001);
    Rng rng = StreamFactory(seed, 0).stream(3, 1);
    const auto stats = LambdaStats::from(child, parent);
    double value = 0.0, step = 0.2;
    const long burn = 5000;
    std::vector<double> draws;
    long accepted = 0;
    for (long it = 0; it < burn + scale.mh_iterations; ++it) {
      const auto d = sample_lambda(value, stats, step, rng);
      value = d.value;
      accepted += d.accepted;
      if (it < burn && (it + 1) % 50 == 0) {
        step = adapt_step_size(accepted / 50.0, step, 0.44, static_cast<int>((it + 1) / 50));
        accepted = 0;
      }
      if (it >= burn) draws.push_back(value);
    }
    const double tv = binned_tv(draws, grid, 40);
    out.push_back({"lambda MH stationary histogram", tv <= 0.05, "TV " + fmt(tv) + " (<= 0.05)"});
  }

  // MH: single-threshold b^G stationary histogram
  {
    Rng data_rng = StreamFactory(seed, 0).stream(4, 0);
    const int n = 40;
    Vector eta(n);
    std::vector<int> scores(n);
    const Vector truth = Vector::Constant(1, 0.3);
    for (int j = 0; j < n; ++j) {
      eta(j) = data_rng.normal();
      scores[j] = data_rng.uniform() < normal_cdf(eta(j) - truth(0)) ? 1 : 0;
    }
    const auto grid = refine(
        [&](double b) {
          Vector t = Vector::Constant(1, b);
          double s = -0.5 * b * b;
          for (int j = 0; j < n; ++j) s += std::log(grm_category_probs(eta(j), t)(scores[j]));
          return s;
        },
        -5.0, 5.0, 2001);
    Rng rng = StreamFactory(seed, 0).stream(4, 1);
    Vector current = Vector::Zero(1);
    const ThresholdSteps steps{0.4, 0.4};
    std::vector<double> draws;
    for (long it = 0; it < 2000 + scale.mh_iterations; ++it) {
      current = sample_bg(current, scores, eta, steps, rng).thresholds;
      if (it >= 2000) draws.push_back(current(0));
    }
    const double tv = binned_tv(draws, grid, 40);
    out.push_back({"b^G MH stationary histogram (one threshold)", tv <= 0.05, "TV " + fmt(tv) + " (<= 0.05)"});
  }
  return out;
}

CheckResult lattice_round_trip(const CheckScale& scale, std::uint64_t seed) {
  Rng rng = StreamFactory(seed, 0).stream(5, 0);
  int failures = 0;
  for (int trial = 0; trial < scale.lattice_trials; ++trial) {
    const int len = 1 + static_cast<int>(rng() % 9);
    Vector b(len);
    do {
      for (int m = 0; m < len; ++m) b(m) = 1.5 * rng.normal();
      std::sort(b.data(), b.data() + len);
      b = snap_thresholds(b);
    } while (!strictly_increasing(b));
    const Vector back = inverse_reparam_b(reparam_b(b));
    if (std::memcmp(back.data(), b.data(), sizeof(double) * static_cast<std::size_t>(len)) != 0) ++failures;
  }
  return {"reparam_b lattice round trip", failures == 0,
          std::to_string(failures) + " inexact of " + std::to_string(scale.lattice_trials) + " vectors"};
}

CheckResult structural_smoke_chain(const CheckScale& scale, std::uint64_t seed) {
  SimulationDesign d;
  d.name = "smoke";
  d.hierarchy = HierarchySpec::two_level(4);
  d.true_lambda = {(Vector(4) << 0.9, 0.8, 0.7, 0.6).finished()};
  d.subjects = scale.smoke_subjects;
  d.dichotomous_per_trait = {10, 10, 10, 0};
  d.graded = {GradedBlock{3, 5, 4}};
  d.cross_loadings = {{0, 1}, {0, 3}, {1, 2}, {1, 0}, {12, 0}, {30, 2}};
  d.guessing = GuessingMode::uniform;
  d.guessing_value = 0.2;
  d.missing_rate = 0.05;
  d.echelon = true;
  const auto data = simulate_dataset(d, seed);

  ModelInputs in;
  in.hierarchy = d.hierarchy;
  in.items = ItemBank::from_specs(design_item_specs(d), 4);
  in.responses = data.responses;
  SamplerConfig cfg;
  cfg.seed = seed;
  cfg.iterations = scale.smoke_iterations;
  int bad_sweeps = 0;
  run_chain(in, cfg, [&](int, const ModelState& st) {
    bool ok = item_structure_holds(st.items);
    for (int i = 0; i < st.items.size(); ++i)
      for (int q : st.items.specs[i].zeros) ok = ok && st.items.a(i, q) == 0.0;
    for (const auto& l : st.lambda) ok = ok && (l.array().abs() < 1.0).all();
    if (!ok) ++bad_sweeps;
  });
  return {"ordering and identifiability zeros every sweep", bad_sweeps == 0,
          std::to_string(bad_sweeps) + " violating sweeps of " + std::to_string(scale.smoke_iterations)};
}

std::vector<CheckResult> oracle_suite(const CheckScale& scale, std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(marginal_scale(scale, seed));
  out.push_back(augmentation_equivalence(scale, seed));
  out.push_back(theta_grid_agreement(scale, seed));
  for (auto& r : conditional_correctness(scale, seed)) out.push_back(std::move(r));
  out.push_back(lattice_round_trip(scale, seed));
  out.push_back(structural_smoke_chain(scale, seed));
  return out;
}

}  // namespace hiermirt::checks
