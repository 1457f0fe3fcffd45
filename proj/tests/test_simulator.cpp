#include <doctest.h>

#include <cmath>

#include "hiermirt/diagnostics.hpp"
#include "hiermirt/simulator.hpp"

using namespace hiermirt;

namespace {

SimulationDesign single_trait(int subjects, int dichotomous) {
  SimulationDesign d;
  d.name = "test";
  d.hierarchy = HierarchySpec::single_level(1);
  d.subjects = subjects;
  d.dichotomous_per_trait = {dichotomous};
  return d;
}

}  // namespace

TEST_CASE("preset designs") {
  const auto d1 = preset_design(1);
  CHECK(d1.subjects == 500);
  REQUIRE(d1.true_lambda.size() == 1);
  CHECK(d1.true_lambda[0](0) == 0.95);
  CHECK(d1.true_lambda[0](1) == 0.90);
  CHECK(d1.true_lambda[0](2) == 0.85);
  CHECK(d1.true_lambda[0](3) == 0.80);
  CHECK(d1.item_count() == 180);
  CHECK(d1.guessing == GuessingMode::zero);
  CHECK(preset_design(2).subjects == 2000);
  CHECK(preset_design(3).subjects == 5000);

  const auto d5 = preset_design(5);
  CHECK(d5.true_lambda[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(d5.fit_fixed_lambda.has_value());
  CHECK(d5.fix_items_at_truth);
  const auto d4 = preset_design(4);
  REQUIRE(d4.fit_fixed_lambda.has_value());
  CHECK((*d4.fit_fixed_lambda)[0].cwiseAbs().maxCoeff() == 0.0);
  for (int id = 4; id <= 7; ++id) {
    CHECK(preset_design(id).subjects == 5000);
    CHECK(preset_design(id).fix_items_at_truth);
  }

  const auto d8 = preset_design(8);
  CHECK(d8.true_lambda[0].size() == 5);
  CHECK(d8.true_lambda[0](4) == 0.75);
  CHECK(d8.subjects == 10000);
  CHECK(d8.item_count() == 185);
  CHECK(d8.guessing == GuessingMode::uniform);
  CHECK(d8.guessing_value == 0.2);

  CHECK_THROWS_AS(preset_design(0), InputError);
  CHECK_THROWS_AS(preset_design(9), InputError);
}

TEST_CASE("design validation") {
  auto d = single_trait(10, 3);
  CHECK_NOTHROW(validate_design(d));
  d.cross_loadings.push_back({5, 0});
  CHECK_THROWS_AS(validate_design(d), InputError);
  d.cross_loadings = {{0, 1}};
  CHECK_THROWS_AS(validate_design(d), InputError);
}

TEST_CASE("preset 1 dataset shape") {
  auto d = preset_design(1);
  const auto data = simulate_dataset(d, 7);
  CHECK(data.responses.items() == 180);
  CHECK(data.responses.subjects() == 500);
  CHECK(data.responses.cells.minCoeff() >= 0);
  CHECK(data.responses.cells.maxCoeff() <= 1);
  CHECK(data.truth.items.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-guessing designs give c = 0") {
  auto d = single_trait(20, 5);
  const auto data = simulate_dataset(d, 3);
  CHECK(data.truth.items.c.cwiseAbs().maxCoeff() == 0.0);
  d.guessing = GuessingMode::fixed;
  d.guessing_value = 0.25;
  const auto fixed = simulate_dataset(d, 3);
  CHECK((fixed.truth.items.c.array() == 0.25).all());
}

TEST_CASE("symmetric items give half correct responses") {
  auto d = single_trait(10000, 10);
  d.generation.a_min = d.generation.a_max = 1.0;
  d.generation.b_sd = 0.0;
  const auto data = simulate_dataset(d, 19);
  const double n = 1e5;
  const double rate = data.responses.cells.cast<double>().sum() / n;
  CHECK(std::abs(rate - 0.5) <= 3 * std::sqrt(0.25 / n));
}

TEST_CASE("graded category frequencies") {
  auto d = single_trait(100000, 0);
  d.graded = {GradedBlock{0, 1, 5}};
  d.generation.a_min = d.generation.a_max = 1.0;
  const auto data = simulate_dataset(d, 2);
  const Vector& t = data.truth.items.thresholds[0];
  REQUIRE(t.size() == 4);
  // With a = 1 and theta ~ N(0, 1) the latent response is N(0, 2).
  const Vector p = grm_category_probs(0.0, t / std::sqrt(2.0));
  const double n = 100000;
  for (int m = 0; m < 5; ++m) {
    const double freq = (data.responses.cells.array() == m).cast<double>().sum() / n;
    CHECK(std::abs(freq - p(m)) <= 3.5 * std::sqrt(p(m) * (1 - p(m)) / n));
  }
  for (Eigen::Index m = 1; m < t.size(); ++m) CHECK(t(m) - t(m - 1) >= 0.3);
}

TEST_CASE("determinism") {
  auto d = preset_design(8);
  d.subjects = 300;
  d.missing_rate = 0.1;
  const auto x = simulate_dataset(d, 99);
  const auto y = simulate_dataset(d, 99);
  CHECK(x.responses.cells == y.responses.cells);
  CHECK(x.truth.items.a == y.truth.items.a);
  CHECK(x.truth.traits.theta[0] == y.truth.traits.theta[0]);
  const auto z = simulate_dataset(d, 100);
  CHECK(x.responses.cells != z.responses.cells);
}

TEST_CASE("correct rates lie above guessing and rise with the predictor") {
  auto d = preset_design(8);
  d.subjects = 4000;
  const auto data = simulate_dataset(d, 5);
  const auto& items = data.truth.items;
  const Matrix& theta1 = data.truth.traits.theta[0];
  int checked = 0;
  for (int i = 0; i < items.size(); i += 7) {
    if (items.is_graded(i)) continue;
    const Vector eta = (items.a.row(i) * theta1).transpose();
    const double rate = data.responses.cells.row(i).cast<double>().mean();
    CHECK(rate > items.c(i));
    CHECK(rate < 1.0);
    // Ten equal-count buckets of the generating predictor.
    std::vector<int> order(eta.size());
    for (int j = 0; j < eta.size(); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int l, int r) { return eta(l) < eta(r); });
    Vector bucket_rate(10), bucket_index(10);
    const int per = static_cast<int>(order.size()) / 10;
    for (int b = 0; b < 10; ++b) {
      double s = 0;
      for (int k = b * per; k < (b + 1) * per; ++k) s += data.responses.cells(i, order[k]);
      bucket_rate(b) = s / per;
      bucket_index(b) = b;
    }
    CHECK(spearman_correlation(bucket_index, bucket_rate) > 0.0);
    ++checked;
  }
  CHECK(checked > 10);
}
