#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include "hiermirt/chain.hpp"
#include "hiermirt/hierarchy.hpp"
#include "hiermirt/sampler.hpp"
#include "hiermirt/simulator.hpp"

using namespace hiermirt;

namespace {

constexpr double kTruncMeanHalf = 1.009160433837033486;  // E[N(0.5, 1) | > 0]

// Covariance of the stacked traits (level 0 first) for a two-level tree,
// written from the generative recursion.
Matrix two_level_prior_cov(const Vector& lambda) {
  const int q = static_cast<int>(lambda.size());
  Matrix s(q + 1, q + 1);
  for (int r = 0; r < q; ++r)
    for (int c = 0; c < q; ++c) s(r, c) = r == c ? 1.0 : lambda(r) * lambda(c);
  for (int r = 0; r < q; ++r) s(r, q) = s(q, r) = lambda(r);
  s(q, q) = 1.0;
  return s;
}

struct DenseConditional {
  Vector mean;
  Matrix cov;
};

// Conditions the joint Gaussian of (theta, targets) on the targets.
DenseConditional dense_condition(const Matrix& prior_cov, const Matrix& loads, const Vector& targets) {
  const Matrix st = prior_cov * loads.transpose();
  const Matrix s = loads * prior_cov * loads.transpose() + Matrix::Identity(loads.rows(), loads.rows());
  const Matrix gain = st * s.inverse();
  return {gain * targets, prior_cov - gain * st.transpose()};
}

// Normal-equations posterior written out directly.
DenseConditional regression_oracle(const Matrix& design, const Vector& x, const Vector& m0, const Matrix& v0) {
  const Matrix v0inv = v0.inverse();
  const Matrix cov = (v0inv + design.transpose() * design).inverse();
  return {cov * (v0inv * m0 + design.transpose() * x), cov};
}

double total_variation(const std::vector<double>& draws, const std::function<double(double)>& logd, double lo,
                       double hi, int bins) {
  const int grid = 2001;
  std::vector<double> mass(bins, 0.0);
  const double h = (hi - lo) / (grid - 1);
  double total = 0.0;
  std::vector<double> w(grid);
  double peak = -kInf;
  for (int g = 0; g < grid; ++g) peak = std::max(peak, logd(lo + g * h));
  for (int g = 0; g < grid; ++g) {
    w[g] = std::exp(logd(lo + g * h) - peak) * ((g == 0 || g == grid - 1) ? 0.5 : 1.0);
    total += w[g];
  }
  for (int g = 0; g < grid; ++g) {
    const int b = std::min(bins - 1, static_cast<int>((g * h) / (hi - lo) * bins));
    mass[b] += w[g] / total;
  }
  std::vector<double> hist(bins, 0.0);
  for (double d : draws) {
    const int b = std::clamp(static_cast<int>((d - lo) / (hi - lo) * bins), 0, bins - 1);
    hist[b] += 1.0 / draws.size();
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += 0.5 * std::abs(hist[b] - mass[b]);
  return tv;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("sample_zx") {
  CHECK(guess_weight(0.0, 0.2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Rng rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto d = sample_zx(1, rng.normal(), 0.0, rng);
    CHECK_FALSE(d.guessed);
    CHECK(d.x >= 0.0);
    const auto n = sample_zx(0, rng.normal(), 0.3, rng);
    CHECK_FALSE(n.guessed);
    CHECK(n.x < 0.0);
  }
  const int n = 1000000;
  int guessed = 0;
  double xsum = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto d = sample_zx(1, 0.5, 0.2, rng);
    if (d.guessed) {
      ++guessed;
      CHECK(d.x == 0.0);
    } else {
      xsum += d.x;
    }
  }
  const double w = guess_weight(0.5, 0.2);
  CHECK(std::abs(static_cast<double>(guessed) / n - w) <= 3 * std::sqrt(w * (1 - w) / n));
  // Truncated N(0.5, 1) on (0, inf): sd about 0.68.
  const int kept = n - guessed;
  CHECK(std::abs(xsum / kept - kTruncMeanHalf) <= 3 * 0.7 / std::sqrt(kept));
}

TEST_CASE("augmentation marginal identity") {
  for (double m : {-2.0, -0.3, 0.0, 1.1, 2.5})
    for (double c : {0.0, 0.1, 0.35}) {
      // P(Y = 1) = P(Z = 1) + P(Z = 0) P(X > 0)
      const double direct = c + (1 - c) * normal_cdf(m);
      CHECK(prob_correct_linear(m, c) == doctest::Approx(direct).epsilon(1e-15));
      const double w = guess_weight(m, c);
      CHECK(w * direct == doctest::Approx(c).epsilon(1e-14));
    }
}

TEST_CASE("theta conditional: K = 1 conjugate reduction") {
  const auto spec = HierarchySpec::single_level(1);
  ThetaEvidence e(1);
  const Vector a = Vector::Ones(1);
  const std::vector<double> targets{0.4, -1.1, 2.0, 0.3};
  for (double t : targets) e.add(a, t);
  const auto tc = theta_full_conditional(spec, {}, e);
  CHECK(tc.mean()(0) == doctest::Approx((0.4 - 1.1 + 2.0 + 0.3) / 5).epsilon(1e-14));
  CHECK(tc.covariance()(0, 0) == doctest::Approx(1.0 / 5).epsilon(1e-14));
}

TEST_CASE("theta conditional: no observations gives the prior") {
  const auto spec = HierarchySpec::two_level(3);
  Loadings l{Vector(3)};
  l[0] << 0.9, 0.6, -0.4;
  const auto tc = theta_full_conditional(spec, l, ThetaEvidence(3));
  CHECK(tc.mean().cwiseAbs().maxCoeff() < 1e-14);
  CHECK((tc.covariance() - two_level_prior_cov(l[0])).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("theta conditional matches dense Gaussian conditioning") {
  const auto spec = HierarchySpec::two_level(3);
  Loadings l{Vector(3)};
  l[0] << 0.85, 0.7, 0.55;
  Matrix loads(6, 4);
  loads.setZero();
  Vector targets(6);
  // Two items per trait; the second item of trait 1 also loads on trait 2.
  loads.block(0, 0, 6, 3) << 1.2, 0, 0, 0.8, 0.5, 0, 0, 1.1, 0, 0, 0.7, 0, 0, 0, 1.4, 0, 0, 0.9;
  targets << 0.7, -0.2, 1.5, 0.1, -0.9, 0.4;
  ThetaEvidence e(3);
  for (int r = 0; r < 6; ++r) e.add(loads.row(r).head(3).transpose(), targets(r));
  const auto tc = theta_full_conditional(spec, l, e);
  const auto dense = dense_condition(two_level_prior_cov(l[0]), loads, targets);
  CHECK((tc.mean() - dense.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((tc.covariance() - dense.cov).cwiseAbs().maxCoeff() < 1e-10);

  SUBCASE("top-down factors") {
    const auto top = tc.level(1, Vector());
    CHECK(std::abs(top.mean(0) - dense.mean(3)) < 1e-10);
    CHECK(std::abs(top.covariance(0, 0) - dense.cov(3, 3)) < 1e-10);
    Vector upper(1);
    upper << 0.37;
    const auto low = tc.level(0, upper);
    const Matrix s11 = dense.cov.topLeftCorner(3, 3);
    const Vector s12 = dense.cov.topRightCorner(3, 1);
    const Vector m = dense.mean.head(3) + s12 * (0.37 - dense.mean(3)) / dense.cov(3, 3);
    const Matrix c = s11 - s12 * s12.transpose() / dense.cov(3, 3);
    CHECK((low.mean - m).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((low.covariance - c).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("shared factorization with a new shift") {
    ThetaEvidence other(3);
    Vector t2 = targets.reverse();
    for (int r = 0; r < 6; ++r) other.add(loads.row(r).head(3).transpose(), t2(r));
    const ThetaConditional shared(tc, other.shift);
    const auto fresh = theta_full_conditional(spec, l, other);
    CHECK((shared.mean() - fresh.mean()).cwiseAbs().maxCoeff() < 1e-12);
    Rng r1(8), r2(8);
    CHECK((shared.sample(r1) - fresh.sample(r2)).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("draws follow the conditional") {
    Rng rng(77);
    const int n = 100000;
    Vector sum = Vector::Zero(4);
    Matrix sq = Matrix::Zero(4, 4);
    for (int k = 0; k < n; ++k) {
      const Vector x = tc.sample(rng);
      sum += x;
      sq += x * x.transpose();
    }
    const Vector mean = sum / n;
    const Matrix cov = sq / n - mean * mean.transpose();
    for (int d = 0; d < 4; ++d) CHECK(std::abs(mean(d) - dense.mean(d)) < 4 * std::sqrt(dense.cov(d, d) / n));
    CHECK((cov - dense.cov).cwiseAbs().maxCoeff() < 0.01);
  }

  SUBCASE("identical inputs and streams give identical draws") {
    Rng r1(3), r2(3);
    CHECK(tc.sample(r1) == tc.sample(r2));
  }

  SUBCASE("log density integrates with the dense Gaussian") {
    const Gaussian g{dense.mean, dense.cov};
    Vector x(4);
    x << 0.2, -0.1, 0.5, 0.3;
    CHECK(tc.log_density(x) == doctest::Approx(g.log_density(x)).epsilon(1e-11));
  }
}

TEST_CASE("c conditional") {
  const auto p = c_conditional(3, 10, 1, 1);
  CHECK(p.alpha == 4);
  CHECK(p.beta == 8);
  const auto q = c_conditional(0, 7, 1, 1);
  CHECK(q.alpha == 1);
  CHECK(q.beta == 8);
  Rng rng(9);
  const int n = 100000;
  double s = 0;
  for (int k = 0; k < n; ++k) s += sample_c(3, 10, 1, 1, rng);
  const double var = 4.0 * 8.0 / (12.0 * 12.0 * 13.0);
  CHECK(std::abs(s / n - 1.0 / 3.0) <= 3 * std::sqrt(var / n));
}

TEST_CASE("(a, b) conditional") {
  const Vector m0 = (Vector(3) << 1, 1, 0).finished();
  const Matrix v0 = 4 * Matrix::Identity(3, 3);
  SUBCASE("no rows gives the prior") {
    const auto g = ab_conditional(Matrix(0, 3), Vector(0), m0, v0);
    CHECK((g.mean - m0).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g.covariance - v0).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("zero trait column leaves a at its prior") {
    Matrix design(4, 2);
    design << 0, -1, 0, -1, 0, -1, 0, -1;
    const Vector x = (Vector(4) << 0.5, -0.2, 1.0, 0.3).finished();
    const Vector m2 = (Vector(2) << 1, 0).finished();
    const auto g = ab_conditional(design, x, m2, 4 * Matrix::Identity(2, 2));
    CHECK(g.mean(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.covariance(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
    // b: precision 1/4 + 4, mean -(sum x) / (4.25)
    CHECK(g.mean(1) == doctest::Approx(-1.6 / 4.25).epsilon(1e-14));
    CHECK(g.covariance(1, 1) == doctest::Approx(1.0 / 4.25).epsilon(1e-14));
  }
  SUBCASE("normal equations") {
    Rng rng(4);
    Matrix design(7, 3);
    Vector x(7);
    for (int r = 0; r < 7; ++r) {
      design.row(r) << rng.normal(), rng.normal(), -1.0;
      x(r) = rng.normal();
    }
    Matrix v(3, 3);
    v << 2, 0.3, 0, 0.3, 1.5, -0.2, 0, -0.2, 3;
    const auto g = ab_conditional(design, x, m0, v);
    const auto o = regression_oracle(design, x, m0, v);
    CHECK((g.mean - o.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.covariance - o.cov).cwiseAbs().maxCoeff() < 1e-12);
    const auto h = ag_conditional(design.leftCols(2), x, m0.head(2), v.topLeftCorner(2, 2));
    const auto p = regression_oracle(design.leftCols(2), x, m0.head(2), v.topLeftCorner(2, 2));
    CHECK((h.mean - p.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((h.covariance - p.cov).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("a^G conditional reductions") {
  const Vector m = Vector::Ones(1);
  const auto prior = ag_conditional(Matrix(0, 1), Vector(0), m, Matrix::Identity(1, 1));
  CHECK(prior.mean(0) == 1.0);
  CHECK(prior.covariance(0, 0) == 1.0);
  const Matrix ones = Matrix::Ones(5, 1);
  const Vector x = (Vector(5) << 1, 2, 0, -1, 3).finished();
  const auto g = ag_conditional(ones, x, Vector::Zero(1), Matrix::Identity(1, 1));
  CHECK(g.mean(0) == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
  CHECK(g.covariance(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("lambda conditional") {
  const Vector child = (Vector(4) << 0.3, -1.2, 0.8, 0.1).finished();
  const Vector parent = (Vector(4) << 0.5, -0.9, 1.1, -0.3).finished();
  double std_normal = 0;
  for (int j = 0; j < 4; ++j) std_normal += normal_logpdf(child(j));
  CHECK(lambda_log_conditional(0.0, child, parent) == doctest::Approx(std_normal).epsilon(1e-14));
  for (double l = -0.95; l < 0.96; l += 0.05) {
    double sum = 0;
    for (int j = 0; j < 4; ++j) sum += conditional_trait_logdensity(child(j), parent(j), l);
    CHECK(lambda_log_conditional(l, child, parent) == doctest::Approx(sum).epsilon(1e-12));
  }
  CHECK(lambda_log_conditional(1.0, child, parent) == -kInf);
  CHECK(lambda_log_conditional(-1.2, child, parent) == -kInf);

  // Golden-section search on (0, 1).
  auto golden = [](const std::function<double(double)>& f) {
    double lo = 0.0, hi = 1.0 - 1e-12;
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int it = 0; it < 200; ++it) {
      const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      if (f(x1) < f(x2)) lo = x1;
      else hi = x2;
    }
    return 0.5 * (lo + hi);
  };
  SUBCASE("one subject with child = parent = 1") {
    // -log(1 - l^2)/2 - (1 - l)/(2 (1 + l)) grows without bound as l -> 1,
    // so the search converges to the upper end of the support.
    const Vector one = Vector::Ones(1);
    const double arg = golden([&](double l) { return lambda_log_conditional(l, one, one); });
    CHECK(arg > 1.0 - 1e-6);
    CHECK(lambda_log_conditional(0.999, one, one) > lambda_log_conditional(0.9, one, one));
  }
  SUBCASE("interior maximum") {
    const double arg = golden([&](double l) { return lambda_log_conditional(l, child, parent); });
    CHECK(arg > 0.0);
    CHECK(arg < 1.0);
    double best = -kInf, where = 0;
    for (int g = 1; g < 100000; ++g) {
      const double l = g / 100000.0;
      const double v = lambda_log_conditional(l, child, parent);
      if (v > best) {
        best = v;
        where = l;
      }
    }
    CHECK(std::abs(arg - where) < 2e-5);
  }
}

TEST_CASE("lambda Metropolis step") {
  const auto stats = LambdaStats::from((Vector(3) << 0.2, 0.5, -0.1).finished(), (Vector(3) << 0.1, 0.4, 0.3).finished());
  Rng rng(12);
  for (int k = 0; k < 100; ++k) CHECK(sample_lambda(0.3, stats, 0.0, rng).accepted);
  for (int k = 0; k < 2000; ++k) {
    const auto d = sample_lambda(0.999, stats, 50.0, rng);
    CHECK(std::abs(d.value) < 1.0);
  }

  Rng data(31);
  Vector child(30), parent(30);
  for (int j = 0; j < 30; ++j) {
    parent(j) = data.normal();
    child(j) = 0.6 * parent(j) + 0.8 * data.normal();
  }
  const auto s = LambdaStats::from(child, parent);
  double value = 0.0;
  std::vector<double> draws;
  for (int it = 0; it < 220000; ++it) {
    value = sample_lambda(value, s, 0.25, rng).value;
    if (it >= 20000) draws.push_back(value);
  }
  const double tv = total_variation(draws, [&](double l) { return lambda_log_conditional(l, s); }, -1.0, 1.0, 40);
  CHECK(tv <= 0.05);
}

TEST_CASE("graded latent responses") {
  Vector t(3);
  t << -1.0, 0.5, 1.2;
  Rng rng(6);
  for (int k = 0; k < 1000; ++k) CHECK(sample_xg(3, rng.normal(), t, rng) > 1.2);
  CHECK_THROWS_AS(sample_xg(4, 0.0, t, rng), InputError);

  Vector sym(2);
  sym << -1.0, 1.0;
  const int n = 1000000;
  double s = 0;
  for (int k = 0; k < n; ++k) s += sample_xg(1, 0.0, sym, rng);
  CHECK(std::abs(s / n) <= 3 * 0.54 / std::sqrt(n));
  Vector zero(1);
  zero << 0.0;
  s = 0;
  for (int k = 0; k < n; ++k) s += sample_xg(1, 0.5, zero, rng);
  CHECK(std::abs(s / n - kTruncMeanHalf) <= 3 * 0.7 / std::sqrt(n));
}

TEST_CASE("threshold reparametrization") {
  const Vector b = (Vector(3) << -1, 0, 2).finished();
  CHECK(reparam_b(b) == (Vector(3) << -1, 1, 2).finished());
  CHECK(inverse_reparam_b(reparam_b(b)) == b);
  CHECK_THROWS_AS(inverse_reparam_b((Vector(2) << 0.0, 0.0).finished()), std::domain_error);
  CHECK_THROWS_AS(reparam_b((Vector(2) << 1.0, 0.5).finished()), std::domain_error);

  Rng rng(2);
  int exact = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int m = 1 + trial % 8;
    Vector t(m);
    double x = 3 * rng.normal();
    for (int k = 0; k < m; ++k) {
      t(k) = x;
      x += 0.001 + 2 * rng.uniform();
    }
    t = snap_thresholds(t);
    if (!strictly_increasing(t)) continue;
    const Vector back = inverse_reparam_b(reparam_b(t));
    if (std::memcmp(back.data(), t.data(), sizeof(double) * m) == 0) ++exact;
    else FAIL("round trip not bit-exact");
  }
  CHECK(exact == 10000);
}

TEST_CASE("collapsed threshold moves") {
  Rng data(40);
  const int n = 40;
  Vector eta(n);
  std::vector<int> scores(n);
  for (int j = 0; j < n; ++j) {
    eta(j) = 0.8 * data.normal();
    scores[j] = eta(j) + data.normal() > 0.3 ? 1 : 0;
  }
  Rng rng(41);
  SUBCASE("zero steps keep the state and accept") {
    Vector t(1);
    t << 0.25;
    const auto d = sample_bg(t, scores, eta, {0.0, 0.0}, rng);
    CHECK(d.translated);
    CHECK(d.thresholds == t);
  }
  SUBCASE("ordering holds after every move") {
    std::vector<int> multi(n);
    for (int j = 0; j < n; ++j) multi[j] = std::min(3, static_cast<int>(std::floor(eta(j) + data.normal() + 1.5)));
    for (int j = 0; j < n; ++j) multi[j] = std::max(0, multi[j]);
    Vector t = snap_thresholds((Vector(3) << -1.0, 0.0, 1.0).finished());
    Vector latent(n);
    for (int it = 0; it < 5000; ++it) {
      t = sample_bg(t, multi, eta, {0.3, 0.3}, rng, &latent).thresholds;
      REQUIRE(strictly_increasing(t));
      for (int j = 0; j < n; ++j) {
        const auto [lo, hi] = grm_interval(multi[j], t);
        REQUIRE(latent(j) > lo);
        REQUIRE(latent(j) < hi);
      }
    }
  }
  SUBCASE("single threshold stationary histogram") {
    Vector t(1);
    t << 0.0;
    std::vector<double> draws;
    for (int it = 0; it < 220000; ++it) {
      t = sample_bg(t, scores, eta, {0.4, 0.4}, rng).thresholds;
      if (it >= 20000) draws.push_back(t(0));
    }
    const double tv = total_variation(
        draws, [&](double b) { return collapsed_threshold_logpost((Vector(1) << b).finished(), scores, eta); }, -3.0,
        3.0, 40);
    CHECK(tv <= 0.05);
  }
}

TEST_CASE("step-size adaptation") {
  CHECK(adapt_step_size(0.44, 1.3, 0.44) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(adapt_step_size(0.0, 1.3, 0.44) < 1.3);
  CHECK(adapt_step_size(1.0, 1.3, 0.44) > 1.3);

  Rng rng(13);
  double x = 0.0, scale = 20.0;
  auto step = [&] {
    const double y = x + scale * rng.normal();
    if (std::log(rng.uniform()) < 0.5 * (x * x - y * y)) {
      x = y;
      return 1;
    }
    return 0;
  };
  for (int w = 1; w <= 400; ++w) {
    int acc = 0;
    for (int k = 0; k < 50; ++k) acc += step();
    scale = adapt_step_size(acc / 50.0, scale, 0.44, w);
  }
  int acc = 0;
  for (int k = 0; k < 10000; ++k) acc += step();
  CHECK(std::abs(acc / 10000.0 - 0.44) <= 0.05);
}

// ---------------------------------------------------------------------------
// Chain-level behavior

namespace {

struct SmallModel {
  HierarchySpec spec = HierarchySpec::two_level(3);
  ItemBank items;
  int subjects = 3;
};

// Three dichotomous items (one per trait, the first with guessing) and one
// two-category graded item.
SmallModel small_model() {
  SmallModel m;
  std::vector<ItemSpec> specs(4);
  for (int i = 0; i < 3; ++i) {
    specs[i].name = "d" + std::to_string(i + 1);
    specs[i].loads = {i};
  }
  specs[0].guessing = true;
  specs[3].name = "g";
  specs[3].kind = ItemKind::graded;
  specs[3].categories = 2;
  specs[3].loads = {0, 1};
  m.items = ItemBank::from_specs(specs, 3);
  return m;
}

struct Draw {
  LatentState traits;
  Loadings lambda;
  ItemBank items;
  ResponseMatrix responses;
};

// Parameters from the prior, then responses from the likelihood.
Draw generative_draw(const SmallModel& m, const Priors& p, Rng& rng) {
  Draw d;
  d.lambda = {Vector(3)};
  for (int q = 0; q < 3; ++q) d.lambda[0](q) = 2 * rng.uniform() - 1;
  d.traits = sample_prior_traits(m.spec, d.lambda, m.subjects, rng);
  d.items = m.items;
  const Eigen::LLT<Matrix> ab(p.ab_cov), ag(p.ag_cov);
  for (int i = 0; i < d.items.size(); ++i) {
    Vector z(4);
    for (int k = 0; k < 4; ++k) z(k) = rng.normal();
    const auto& s = d.items.specs[i];
    if (d.items.is_graded(i)) {
      const Vector v = p.ag_mean + ag.matrixL() * z.head(3);
      for (int q : s.loads) d.items.a(i, q) = v(q);
      d.items.thresholds[i](0) = snap_threshold(rng.normal());
    } else {
      const Vector v = p.ab_mean + ab.matrixL() * z;
      for (int q : s.loads) d.items.a(i, q) = v(q);
      d.items.b(i) = v(3);
      d.items.c(i) = s.guessing ? rng.beta(p.c_alpha, p.c_beta) : 0.0;
    }
  }
  d.responses.cells.resize(d.items.size(), m.subjects);
  for (int i = 0; i < d.items.size(); ++i)
    for (int j = 0; j < m.subjects; ++j) {
      const double eta = d.items.a.row(i).dot(d.traits.theta[0].col(j));
      if (d.items.is_graded(i)) d.responses.cells(i, j) = eta + rng.normal() > d.items.thresholds[i](0) ? 1 : 0;
      else d.responses.cells(i, j) = rng.uniform() < prob_correct_linear(eta - d.items.b(i), d.items.c(i)) ? 1 : 0;
    }
  return d;
}

}  // namespace

TEST_CASE("single blocks preserve the joint law") {
  const auto m = small_model();
  const Priors priors = Priors::defaults(3);
  const int reps = 40000;
  // Sums of the tracked quantities after the block.
  struct Moments {
    double theta1 = 0, theta1_sq = 0, theta2 = 0, lambda = 0, lambda_sq = 0, a = 0, a_sq = 0, b = 0, c = 0, ag = 0,
           bg = 0, bg_sq = 0;
  };
  auto run = [&](const std::function<void(GibbsSampler&, const StreamFactory&)>& block) {
    Moments s;
    Rng rng(1234);
    for (int r = 0; r < reps; ++r) {
      const auto d = generative_draw(m, priors, rng);
      ModelInputs in{m.spec, d.items, d.responses, true, d.lambda, d.traits};
      SamplerConfig cfg;
      cfg.iterations = 1;
      cfg.seed = 1000 + r;
      cfg.lambda_step = 0.5;
      cfg.threshold_translate_step = 0.8;
      GibbsSampler g(in, cfg);
      block(g, StreamFactory(cfg.seed, 1));
      const auto& st = g.state();
      s.theta1 += st.traits.theta[0](0, 0);
      s.theta1_sq += st.traits.theta[0](1, 1) * st.traits.theta[0](1, 1);
      s.theta2 += st.traits.theta[1](0, 2);
      s.lambda += st.lambda[0](1);
      s.lambda_sq += st.lambda[0](2) * st.lambda[0](2);
      s.a += st.items.a(1, 1);
      s.a_sq += st.items.a(2, 2) * st.items.a(2, 2);
      s.b += st.items.b(0);
      s.c += st.items.c(0);
      s.ag += st.items.a(3, 1);
      s.bg += st.items.thresholds[3](0);
      s.bg_sq += st.items.thresholds[3](0) * st.items.thresholds[3](0);
    }
    return s;
  };
  // Prior moments and standard deviations of the per-draw quantities.
  auto close = [&](double sum, double mean, double sd) { return std::abs(sum / reps - mean) <= 4 * sd / std::sqrt(reps); };
  auto report = [&](const Moments& s) {
    CHECK(close(s.theta1, 0, 1));
    CHECK(close(s.theta1_sq, 1, std::sqrt(2.0)));
    CHECK(close(s.theta2, 0, 1));
    CHECK(close(s.lambda, 0, std::sqrt(1.0 / 3)));
    CHECK(close(s.lambda_sq, 1.0 / 3, std::sqrt(1.0 / 5 - 1.0 / 9)));
    CHECK(close(s.a, 1, 2));
    CHECK(close(s.a_sq, 5, std::sqrt(3 * 16.0 + 6 * 4.0 + 1 - 25.0)));
    CHECK(close(s.b, 0, 2));
    CHECK(close(s.c, 0.2, std::sqrt(4.0 / (25.0 * 6.0))));
    CHECK(close(s.ag, 1, 2));
    CHECK(close(s.bg, 0, 1));
    CHECK(close(s.bg_sq, 1, std::sqrt(2.0)));
  };
  SUBCASE("zx") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_zx(f); })); }
  SUBCASE("ab") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_ab(f); })); }
  SUBCASE("lambda") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_lambda(f); })); }
  SUBCASE("theta") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_theta(f); })); }
  SUBCASE("c") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_c(f); })); }
  SUBCASE("xg") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_xg(f); })); }
  SUBCASE("ag") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_ag(f); })); }
  SUBCASE("bg") { report(run([](GibbsSampler& g, const StreamFactory& f) { g.update_bg(f); })); }
}

TEST_CASE("block updates draw from the reported conditionals") {
  const auto m = small_model();
  Rng rng(5);
  const auto d = generative_draw(m, Priors::defaults(3), rng);
  ModelInputs in{m.spec, d.items, d.responses, true, d.lambda, d.traits};
  SamplerConfig cfg;
  cfg.iterations = 1;
  GibbsSampler g(in, cfg);
  const ModelState start = g.state();
  const Gaussian ab = g.ab_conditional(1);
  const ThetaConditional tc = g.theta_conditional(2);
  const int n = 20000;
  Vector ab_sum = Vector::Zero(ab.mean.size()), th_sum = Vector::Zero(4);
  for (int k = 0; k < n; ++k) {
    g.mutable_state() = start;
    g.update_ab(StreamFactory(9, k));
    ab_sum(0) += g.state().items.a(1, 1);
    ab_sum(1) += g.state().items.b(1);
    g.mutable_state() = start;
    g.update_theta(StreamFactory(9, k));
    th_sum += g.state().traits.stacked(2);
  }
  const Matrix tcov = tc.covariance();
  for (int k = 0; k < 2; ++k)
    CHECK(std::abs(ab_sum(k) / n - ab.mean(k)) <= 4 * std::sqrt(ab.covariance(k, k) / n));
  for (int k = 0; k < 4; ++k) CHECK(std::abs(th_sum(k) / n - tc.mean()(k)) <= 4 * std::sqrt(tcov(k, k) / n));
}

TEST_CASE("run_chain bookkeeping") {
  auto design = preset_design(8);
  design.subjects = 60;
  design.dichotomous_per_trait = {4, 4, 4, 4, 0};
  design.graded = {GradedBlock{4, 3, 4}};
  design.cross_loadings = {{4, 0}, {16, 1}};
  design.missing_rate = 0.05;
  const auto data = simulate_dataset(design, 3);
  ModelInputs in;
  in.hierarchy = design.hierarchy;
  in.items = ItemBank::from_specs(design_item_specs(design), 5);
  in.responses = data.responses;

  SamplerConfig cfg;
  cfg.seed = 21;
  cfg.iterations = 60;
  cfg.burnin = 20;
  cfg.thin = 3;
  cfg.trace_theta_subjects = 2;
  int sweeps = 0;
  const auto t1 = run_chain(in, cfg, [&](int, const ModelState& s) {
    ++sweeps;
    REQUIRE(item_structure_holds(s.items));
    REQUIRE(s.items.a(0, 1) == 0.0);
    REQUIRE(s.lambda[0].cwiseAbs().maxCoeff() < 1.0);
  });
  CHECK(sweeps == 60);
  CHECK(t1.stored == cfg.stored_draws());
  CHECK(t1.stored == 13);
  REQUIRE(t1.group("lambda") != nullptr);
  CHECK(t1.group("lambda")->draws.rows() == 13);
  CHECK(t1.group("lambda")->columns.front() == "lambda_2_1");
  REQUIRE(t1.group("theta") != nullptr);
  CHECK(t1.group("theta")->draws.cols() == 2 * 6);
  CHECK(t1.group("bg") != nullptr);
  CHECK(t1.group("c") != nullptr);

  const auto t2 = run_chain(in, cfg);
  for (std::size_t k = 0; k < t1.groups.size(); ++k) CHECK(t1.groups[k].draws == t2.groups[k].draws);
  CHECK(t1.theta_mean[0] == t2.theta_mean[0]);

  SUBCASE("no post-burn-in iterations") {
    SamplerConfig empty = cfg;
    empty.burnin = empty.iterations;
    const auto t = run_chain(in, empty);
    CHECK(t.stored == 0);
    for (const auto& g : t.groups) CHECK(g.draws.rows() == 0);
  }
  SUBCASE("invalid configurations") {
    SamplerConfig bad = cfg;
    bad.burnin = 100;
    CHECK_THROWS_AS(run_chain(in, bad), InputError);
    bad = cfg;
    bad.lambda_step = 0.0;
    CHECK_THROWS_AS(run_chain(in, bad), InputError);
  }
  SUBCASE("fixed lambda stays fixed") {
    SamplerConfig fixed = cfg;
    fixed.fixed_lambda = constant_loadings(in.hierarchy, 0.0);
    const auto t = run_chain(in, fixed);
    REQUIRE(t.group("lambda") != nullptr);
    CHECK(t.group("lambda")->draws.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("thread count does not change the chain") {
  auto design = preset_design(1);
  design.subjects = 80;
  const auto data = simulate_dataset(design, 4);
  ModelInputs in{design.hierarchy, ItemBank::from_specs(design_item_specs(design), 4), data.responses};
  SamplerConfig cfg;
  cfg.iterations = 20;
  setenv("HIERMIRT_THREADS", "1", 1);
  const auto serial = run_chain(in, cfg);
  setenv("HIERMIRT_THREADS", "3", 1);
  const auto threaded = run_chain(in, cfg);
  unsetenv("HIERMIRT_THREADS");
  for (std::size_t k = 0; k < serial.groups.size(); ++k) CHECK(serial.groups[k].draws == threaded.groups[k].draws);
}

TEST_CASE("initial thresholds") {
  const std::vector<int> scores{0, 0, 1, 2, 2, 2, kMissing, 3};
  const Vector t = initial_thresholds(scores, 4);
  REQUIRE(t.size() == 3);
  CHECK(strictly_increasing(t));
  CHECK(t(0) == doctest::Approx(normal_quantile(2.5 / 9.0)).epsilon(1e-9));
  const Vector sparse = initial_thresholds(std::vector<int>{0, 0, 0}, 3);
  CHECK(sparse(1) - sparse(0) >= 0.1 - 1e-12);
}
