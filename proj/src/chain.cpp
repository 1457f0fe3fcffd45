#include "hiermirt/chain.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "hiermirt/hierarchy.hpp"

namespace hiermirt {

namespace {

template <class F>
void parallel_for(int n, const F& body) {
  const int width = std::min(parallel_width(), n);
  if (width <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (int w = 0; w < width; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += width) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint32_t key(Block b) { return static_cast<std::uint32_t>(b); }

/// Free coordinates of an item, optionally followed by the intercept slot.
std::vector<Eigen::Index> coords(const ItemSpec& spec, int intercept_slot) {
  std::vector<Eigen::Index> idx(spec.loads.begin(), spec.loads.end());
  if (intercept_slot >= 0) idx.push_back(intercept_slot);
  return idx;
}

const char* block_name(Block b) {
  switch (b) {
    case Block::zx: return "(X, Z)";
    case Block::ab: return "(a, b)";
    case Block::lambda: return "lambda";
    case Block::theta: return "theta";
    case Block::c: return "c";
    case Block::xg: return "X^G";
    case Block::ag: return "a^G";
    case Block::bg: return "b^G";
    case Block::init: return "init";
  }
  return "?";
}

}  // namespace

int parallel_width() {
  int n = 0;
  if (const char* env = std::getenv("HIERMIRT_THREADS")) n = std::atoi(env);
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(n, 1);
}

int SamplerConfig::stored_draws() const {
  return std::max(0, (iterations - resolved_burnin()) / std::max(thin, 1));
}

void SamplerConfig::validate() const {
  if (iterations < 0) throw InputError("sampler: iterations must be non-negative");
  const int b = resolved_burnin();
  if (b < 0 || b > iterations) throw InputError("sampler: burn-in must lie in [0, iterations]");
  if (thin < 1) throw InputError("sampler: thin must be at least 1");
  if (!(lambda_step > 0.0) || !(threshold_translate_step > 0.0) || !(threshold_spread_step > 0.0))
    throw InputError("sampler: step scales must be positive");
  if (adapt_window < 1) throw InputError("sampler: adapt_window must be positive");
  if (!(target_scalar > 0.0 && target_scalar < 1.0) || !(target_block > 0.0 && target_block < 1.0))
    throw InputError("sampler: target acceptance rates must lie in (0, 1)");
  if (!(std::abs(init_lambda) < 1.0)) throw InputError("sampler: init_lambda must lie in (-1, 1)");
  if (trace_theta_subjects < 0) throw InputError("sampler: trace_theta_subjects must be non-negative");
  if (priors) {
    const auto spd = [](const Matrix& m) {
      if (m.rows() != m.cols() || !m.isApprox(m.transpose())) return false;
      Eigen::LLT<Matrix> llt(m);
      return llt.info() == Eigen::Success;
    };
    if (!spd(priors->ab_cov) || !spd(priors->ag_cov))
      throw InputError("sampler: prior covariances must be symmetric positive definite");
    if (!(priors->c_alpha > 0.0 && priors->c_beta > 0.0)) throw InputError("sampler: Beta prior needs alpha, beta > 0");
  }
}

const TraceGroup* ChainTrace::group(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return &g;
  return nullptr;
}

Vector initial_thresholds(std::span<const int> scores, int categories) {
  Vector counts = Vector::Constant(categories, 0.5);
  for (int s : scores)
    if (s != kMissing) counts(s) += 1.0;
  const double total = counts.sum();
  Vector t(categories - 1);
  double cum = 0.0;
  constexpr double kMinGap = 0.1;
  for (int m = 0; m < categories - 1; ++m) {
    cum += counts(m) / total;
    t(m) = normal_quantile(std::clamp(cum, 1e-4, 1.0 - 1e-4));
    if (m > 0) t(m) = std::max(t(m), t(m - 1) + kMinGap);
  }
  return snap_thresholds(t);
}

// ---------------------------------------------------------------------------

GibbsSampler::GibbsSampler(ModelInputs inputs, SamplerConfig config)
    : inputs_(std::move(inputs)), config_(std::move(config)) {
  config_.validate();
  require_valid_hierarchy(inputs_.hierarchy);
  validate_items(inputs_.items);
  if (inputs_.items.level1_traits() != inputs_.hierarchy.traits[0])
    throw InputError("items load on " + std::to_string(inputs_.items.level1_traits()) +
                     " level-1 traits but the hierarchy declares " + std::to_string(inputs_.hierarchy.traits[0]));
  validate_responses(inputs_.responses, inputs_.items);
  if (config_.fixed_lambda) validate_loadings(inputs_.hierarchy, *config_.fixed_lambda);
  if (inputs_.initial_lambda) validate_loadings(inputs_.hierarchy, *inputs_.initial_lambda);
  const int q1 = inputs_.hierarchy.traits[0];
  priors_ = config_.priors ? *config_.priors : Priors::defaults(q1);
  if (priors_.ab_mean.size() != q1 + 1 || priors_.ab_cov.rows() != q1 + 1 || priors_.ag_mean.size() != q1 ||
      priors_.ag_cov.rows() != q1)
    throw InputError("sampler: prior dimensions do not match the level-1 trait count");
  initialize();
}

void GibbsSampler::initialize() {
  const auto& spec = inputs_.hierarchy;
  const int subjects = inputs_.responses.subjects();
  const int items = inputs_.items.size();

  if (inputs_.initial_traits) {
    state_.traits = *inputs_.initial_traits;
    if (state_.traits.subjects() != subjects || static_cast<int>(state_.traits.theta.size()) != spec.levels())
      throw InputError("initial traits do not match the hierarchy and subject count");
  } else {
    state_.traits = LatentState::zeros(spec, subjects);
  }
  if (config_.fixed_lambda) state_.lambda = *config_.fixed_lambda;
  else if (inputs_.initial_lambda) state_.lambda = *inputs_.initial_lambda;
  else state_.lambda = constant_loadings(spec, config_.init_lambda);

  state_.items = inputs_.items;
  auto& bank = state_.items;
  if (!inputs_.items_initialized) {
    bank.a.setZero();
    const double c0 = priors_.c_alpha / (priors_.c_alpha + priors_.c_beta);
    for (int i = 0; i < items; ++i) {
      const auto& s = bank.specs[i];
      if (bank.is_graded(i)) {
        for (int q : s.loads) bank.a(i, q) = priors_.ag_mean(q);
        std::vector<int> row(subjects);
        for (int j = 0; j < subjects; ++j) row[j] = inputs_.responses.cells(i, j);
        bank.thresholds[i] = initial_thresholds(row, s.categories);
      } else {
        for (int q : s.loads) bank.a(i, q) = priors_.ab_mean(q);
        bank.b(i) = 0.0;
        bank.c(i) = s.guessing ? c0 : 0.0;
      }
    }
  }

  // graded ordinals and MH slot layout: lambda blocks, then (translate, spread) per graded item
  graded_slot_.assign(items, -1);
  int graded = 0;
  for (int i = 0; i < items; ++i)
    if (bank.is_graded(i)) graded_slot_[i] = graded++;
  mh_.clear();
  lambda_index_.clear();
  for (int k = 0; k + 1 < spec.levels(); ++k) {
    lambda_index_.push_back(static_cast<int>(mh_.size()));
    for (int q = 0; q < spec.traits[k]; ++q)
      mh_.push_back({"lambda_" + std::to_string(k + 2) + "_" + std::to_string(q + 1), 0, 0, config_.lambda_step});
  }
  threshold_index_ = static_cast<int>(mh_.size());
  for (int i = 0; i < items; ++i) {
    if (!bank.is_graded(i)) continue;
    const std::string id = std::to_string(i + 1);
    mh_.push_back({"bg_translate_" + id, 0, 0, config_.threshold_translate_step});
    mh_.push_back({"bg_spread_" + id, 0, 0, config_.threshold_spread_step});
  }
  window_ = mh_;

  state_.augmented.latent = Matrix::Zero(items, subjects);
  state_.augmented.guessed = ByteMatrix::Zero(items, subjects);
  const StreamFactory streams(config_.seed, 0);
  const Matrix& theta1 = state_.traits.theta[0];
  parallel_for(items, [&](int i) {
    Rng rng = streams.stream(key(Block::init), static_cast<std::uint64_t>(i));
    for (int j = 0; j < subjects; ++j) {
      const int y = inputs_.responses.cells(i, j);
      if (y == kMissing) continue;
      const double eta = bank.a.row(i).dot(theta1.col(j));
      if (bank.is_graded(i)) {
        state_.augmented.latent(i, j) = sample_xg(y, eta, bank.thresholds[i], rng);
      } else {
        const auto d = sample_zx(y, eta - bank.b(i), bank.c(i), rng);
        state_.augmented.latent(i, j) = d.x;
        state_.augmented.guessed(i, j) = d.guessed ? 1 : 0;
      }
    }
  });
}

BlockAcceptance& GibbsSampler::lambda_block(int level, int trait) { return mh_[lambda_index_[level] + trait]; }
BlockAcceptance& GibbsSampler::translate_block(int item) { return mh_[threshold_index_ + 2 * graded_slot_[item]]; }
BlockAcceptance& GibbsSampler::spread_block(int item) { return mh_[threshold_index_ + 2 * graded_slot_[item] + 1]; }

void GibbsSampler::reset_acceptance() {
  for (auto& b : mh_) b.accepted = b.proposed = 0;
  window_ = mh_;
}

void GibbsSampler::adapt(int window_index) {
  for (std::size_t s = 0; s < mh_.size(); ++s) {
    auto& b = mh_[s];
    const long proposed = b.proposed - window_[s].proposed;
    if (proposed <= 0) continue;
    const double rate = static_cast<double>(b.accepted - window_[s].accepted) / proposed;
    double target = config_.target_scalar;
    if (static_cast<int>(s) >= threshold_index_ && (s - threshold_index_) % 2 == 1) {
      const int item = [&] {
        const int ordinal = static_cast<int>(s - threshold_index_) / 2;
        for (int i = 0; i < static_cast<int>(graded_slot_.size()); ++i)
          if (graded_slot_[i] == ordinal) return i;
        return 0;
      }();
      if (state_.items.thresholds[item].size() > 2) target = config_.target_block;
    }
    b.scale = adapt_step_size(rate, b.scale, target, window_index);
  }
  window_ = mh_;
}

// ---------------------------------------------------------------------------

void GibbsSampler::update_zx(const StreamFactory& streams) {
  const auto& bank = state_.items;
  const Matrix& theta1 = state_.traits.theta[0];
  const int subjects = inputs_.responses.subjects();
  parallel_for(bank.size(), [&](int i) {
    if (bank.is_graded(i)) return;
    Rng rng = streams.stream(key(Block::zx), static_cast<std::uint64_t>(i));
    const Vector a = bank.a.row(i).transpose();
    for (int j = 0; j < subjects; ++j) {
      const int y = inputs_.responses.cells(i, j);
      if (y == kMissing) continue;
      const auto d = sample_zx(y, a.dot(theta1.col(j)) - bank.b(i), bank.c(i), rng);
      state_.augmented.latent(i, j) = d.x;
      state_.augmented.guessed(i, j) = d.guessed ? 1 : 0;
    }
  });
}

Gaussian GibbsSampler::ab_conditional(int i) const {
  const auto& bank = state_.items;
  if (bank.is_graded(i)) throw InputError("ab_conditional: item " + std::to_string(i + 1) + " is graded");
  const Matrix& theta1 = state_.traits.theta[0];
  const int q1 = bank.level1_traits();
  const auto idx = coords(bank.specs[i], q1);
  const auto n = static_cast<Eigen::Index>(idx.size());
  Matrix gram = Matrix::Zero(n, n);
  Vector cross = Vector::Zero(n);
  Vector row(n);
  for (int j = 0; j < inputs_.responses.subjects(); ++j) {
    if (inputs_.responses.cells(i, j) == kMissing || state_.augmented.guessed(i, j)) continue;
    for (Eigen::Index k = 0; k + 1 < n; ++k) row(k) = theta1(idx[k], j);
    row(n - 1) = -1.0;
    gram.noalias() += row * row.transpose();
    cross.noalias() += row * state_.augmented.latent(i, j);
  }
  return conjugate_normal(gram, cross, priors_.ab_mean(idx), priors_.ab_cov(idx, idx));
}

Gaussian GibbsSampler::ag_conditional(int i) const {
  const auto& bank = state_.items;
  if (!bank.is_graded(i)) throw InputError("ag_conditional: item " + std::to_string(i + 1) + " is dichotomous");
  const Matrix& theta1 = state_.traits.theta[0];
  const auto idx = coords(bank.specs[i], -1);
  const auto n = static_cast<Eigen::Index>(idx.size());
  Matrix gram = Matrix::Zero(n, n);
  Vector cross = Vector::Zero(n);
  Vector row(n);
  for (int j = 0; j < inputs_.responses.subjects(); ++j) {
    if (inputs_.responses.cells(i, j) == kMissing) continue;
    for (Eigen::Index k = 0; k < n; ++k) row(k) = theta1(idx[k], j);
    gram.noalias() += row * row.transpose();
    cross.noalias() += row * state_.augmented.latent(i, j);
  }
  return conjugate_normal(gram, cross, priors_.ag_mean(idx), priors_.ag_cov(idx, idx));
}

BetaParams GibbsSampler::c_conditional(int i) const {
  int observed = 0, guessed = 0;
  for (int j = 0; j < inputs_.responses.subjects(); ++j) {
    if (inputs_.responses.cells(i, j) == kMissing) continue;
    ++observed;
    guessed += state_.augmented.guessed(i, j);
  }
  return hiermirt::c_conditional(guessed, observed, priors_.c_alpha, priors_.c_beta);
}

ThetaConditional GibbsSampler::theta_conditional(int j) const {
  const auto& bank = state_.items;
  ThetaEvidence evidence(bank.level1_traits());
  for (int i = 0; i < bank.size(); ++i) {
    if (inputs_.responses.cells(i, j) == kMissing) continue;
    const Vector a = bank.a.row(i).transpose();
    if (bank.is_graded(i)) evidence.add(a, state_.augmented.latent(i, j));
    else if (!state_.augmented.guessed(i, j)) evidence.add(a, state_.augmented.latent(i, j) + bank.b(i));
  }
  return ThetaConditional(inputs_.hierarchy, state_.lambda, evidence);
}

void GibbsSampler::update_ab(const StreamFactory& streams) {
  auto& bank = state_.items;
  const Matrix& theta1 = state_.traits.theta[0];
  const int q1 = bank.level1_traits();
  const int subjects = inputs_.responses.subjects();
  Matrix ext(q1 + 1, subjects);
  ext.topRows(q1) = theta1;
  ext.row(q1).setConstant(-1.0);
  const Matrix full_gram = ext * ext.transpose();
  // Excluded cells carry latent 0, so one product gives every item's cross term.
  const Matrix cross = ext * state_.augmented.latent.transpose();
  parallel_for(bank.size(), [&](int i) {
    if (bank.is_graded(i)) return;
    Matrix gram = full_gram;
    for (int j = 0; j < subjects; ++j)
      if (inputs_.responses.cells(i, j) == kMissing || state_.augmented.guessed(i, j))
        gram.noalias() -= ext.col(j) * ext.col(j).transpose();
    const auto idx = coords(bank.specs[i], q1);
    Rng rng = streams.stream(key(Block::ab), static_cast<std::uint64_t>(i));
    const Vector draw = conjugate_normal(gram(idx, idx), cross.col(i)(idx), priors_.ab_mean(idx),
                                         priors_.ab_cov(idx, idx))
                            .sample(rng);
    bank.a.row(i).setZero();
    for (std::size_t n = 0; n + 1 < idx.size(); ++n) bank.a(i, idx[n]) = draw(static_cast<Eigen::Index>(n));
    bank.b(i) = draw(draw.size() - 1);
  });
}

void GibbsSampler::update_lambda(const StreamFactory& streams) {
  if (config_.fixed_lambda) return;
  const auto& spec = inputs_.hierarchy;
  std::uint64_t entity = 0;
  for (int k = 0; k + 1 < spec.levels(); ++k) {
    for (int q = 0; q < spec.traits[k]; ++q, ++entity) {
      Rng rng = streams.stream(key(Block::lambda), entity);
      const Vector child = state_.traits.theta[k].row(q).transpose();
      const Vector parent = state_.traits.theta[k + 1].row(spec.parent[k][q]).transpose();
      auto& block = lambda_block(k, q);
      const auto draw = sample_lambda(state_.lambda[k](q), LambdaStats::from(child, parent), block.scale, rng);
      state_.lambda[k](q) = draw.value;
      ++block.proposed;
      if (draw.accepted) ++block.accepted;
    }
  }
}

void GibbsSampler::update_theta(const StreamFactory& streams) {
  const auto& spec = inputs_.hierarchy;
  const auto& bank = state_.items;
  const int q1 = bank.level1_traits();
  const int subjects = inputs_.responses.subjects();
  const int items = bank.size();

  // W(i, j): x + b for included dichotomous cells, x^G for graded cells, 0 otherwise.
  Matrix w = state_.augmented.latent;
  for (int i = 0; i < items; ++i) {
    if (bank.is_graded(i)) continue;
    for (int j = 0; j < subjects; ++j)
      if (inputs_.responses.cells(i, j) != kMissing && !state_.augmented.guessed(i, j)) w(i, j) += bank.b(i);
  }
  const Matrix shift = bank.a.transpose() * w;

  ThetaEvidence full(q1);
  full.information = bank.a.transpose() * bank.a;
  const ThetaConditional shared(spec, state_.lambda, full);

  parallel_for(subjects, [&](int j) {
    ThetaEvidence evidence(q1);
    bool excluded = false;
    for (int i = 0; i < items; ++i) {
      if (inputs_.responses.cells(i, j) == kMissing || state_.augmented.guessed(i, j)) {
        if (!excluded) evidence.information = full.information;
        excluded = true;
        evidence.information.noalias() -= bank.a.row(i).transpose() * bank.a.row(i);
      }
    }
    Rng rng = streams.stream(key(Block::theta), static_cast<std::uint64_t>(j));
    Vector draw;
    if (excluded) {
      evidence.shift = shift.col(j);
      draw = ThetaConditional(spec, state_.lambda, evidence).sample(rng);
    } else {
      draw = ThetaConditional(shared, shift.col(j)).sample(rng);
    }
    state_.traits.set_stacked(j, draw);
  });
}

void GibbsSampler::update_c(const StreamFactory& streams) {
  auto& bank = state_.items;
  parallel_for(bank.size(), [&](int i) {
    if (bank.is_graded(i) || !bank.specs[i].guessing) return;
    const auto p = c_conditional(i);
    Rng rng = streams.stream(key(Block::c), static_cast<std::uint64_t>(i));
    bank.c(i) = rng.beta(p.alpha, p.beta);
  });
}

void GibbsSampler::update_xg(const StreamFactory& streams) {
  const auto& bank = state_.items;
  const Matrix& theta1 = state_.traits.theta[0];
  const int subjects = inputs_.responses.subjects();
  parallel_for(bank.size(), [&](int i) {
    if (!bank.is_graded(i)) return;
    Rng rng = streams.stream(key(Block::xg), static_cast<std::uint64_t>(i));
    const Vector a = bank.a.row(i).transpose();
    for (int j = 0; j < subjects; ++j) {
      const int y = inputs_.responses.cells(i, j);
      if (y == kMissing) continue;
      state_.augmented.latent(i, j) = sample_xg(y, a.dot(theta1.col(j)), bank.thresholds[i], rng);
    }
  });
}

void GibbsSampler::update_ag(const StreamFactory& streams) {
  auto& bank = state_.items;
  const Matrix& theta1 = state_.traits.theta[0];
  const int subjects = inputs_.responses.subjects();
  bool any = false;
  for (int i = 0; i < bank.size(); ++i) any = any || bank.is_graded(i);
  if (!any) return;
  const Matrix full_gram = theta1 * theta1.transpose();
  const Matrix cross = theta1 * state_.augmented.latent.transpose();
  parallel_for(bank.size(), [&](int i) {
    if (!bank.is_graded(i)) return;
    Matrix gram = full_gram;
    for (int j = 0; j < subjects; ++j)
      if (inputs_.responses.cells(i, j) == kMissing) gram.noalias() -= theta1.col(j) * theta1.col(j).transpose();
    const auto idx = coords(bank.specs[i], -1);
    Rng rng = streams.stream(key(Block::ag), static_cast<std::uint64_t>(i));
    const Vector draw =
        conjugate_normal(gram(idx, idx), cross.col(i)(idx), priors_.ag_mean(idx), priors_.ag_cov(idx, idx)).sample(rng);
    bank.a.row(i).setZero();
    for (std::size_t n = 0; n < idx.size(); ++n) bank.a(i, idx[n]) = draw(static_cast<Eigen::Index>(n));
  });
}

void GibbsSampler::update_bg(const StreamFactory& streams) {
  auto& bank = state_.items;
  const Matrix& theta1 = state_.traits.theta[0];
  const int subjects = inputs_.responses.subjects();
  parallel_for(bank.size(), [&](int i) {
    if (!bank.is_graded(i)) return;
    std::vector<int> scores(subjects);
    for (int j = 0; j < subjects; ++j) scores[j] = inputs_.responses.cells(i, j);
    const Vector eta = (bank.a.row(i) * theta1).transpose();
    auto& translate = translate_block(i);
    auto& spread = spread_block(i);
    Rng rng = streams.stream(key(Block::bg), static_cast<std::uint64_t>(i));
    Vector latent;
    const auto draw =
        sample_bg(bank.thresholds[i], scores, eta, {translate.scale, spread.scale}, rng, &latent);
    bank.thresholds[i] = draw.thresholds;
    state_.augmented.latent.row(i) = latent.transpose();
    ++translate.proposed;
    if (draw.translated) ++translate.accepted;
    if (bank.thresholds[i].size() >= 2) {
      ++spread.proposed;
      if (draw.spread) ++spread.accepted;
    }
  });
}

void GibbsSampler::sweep(int iteration) {
  const StreamFactory streams(config_.seed, static_cast<std::uint64_t>(iteration) + 1);
  const auto run = [&](Block b, auto&& fn) {
    try {
      fn(streams);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(iteration) + ", block " + block_name(b) + ": " + e.what());
    }
  };
  const bool items = config_.sample_items;
  run(Block::zx, [&](const StreamFactory& s) { update_zx(s); });
  if (items) run(Block::ab, [&](const StreamFactory& s) { update_ab(s); });
  run(Block::lambda, [&](const StreamFactory& s) { update_lambda(s); });
  run(Block::theta, [&](const StreamFactory& s) { update_theta(s); });
  if (items) run(Block::c, [&](const StreamFactory& s) { update_c(s); });
  run(Block::xg, [&](const StreamFactory& s) { update_xg(s); });
  if (items) run(Block::ag, [&](const StreamFactory& s) { update_ag(s); });
  if (items) run(Block::bg, [&](const StreamFactory& s) { update_bg(s); });
}

// ---------------------------------------------------------------------------

namespace {

struct TraceLayout {
  std::vector<TraceGroup> groups;

  void init(const ModelState& st, const HierarchySpec& spec, int theta_subjects, int rows) {
    const auto& bank = st.items;
    TraceGroup lambda{"lambda", {}, {}}, a{"a", {}, {}}, b{"b", {}, {}}, c{"c", {}, {}}, ag{"ag", {}, {}},
        bg{"bg", {}, {}}, theta{"theta", {}, {}};
    for (int k = 0; k + 1 < spec.levels(); ++k)
      for (int q = 0; q < spec.traits[k]; ++q)
        lambda.columns.push_back("lambda_" + std::to_string(k + 2) + "_" + std::to_string(q + 1));
    for (int i = 0; i < bank.size(); ++i) {
      const std::string id = std::to_string(i + 1);
      auto& target = bank.is_graded(i) ? ag : a;
      for (int q : bank.specs[i].loads) target.columns.push_back(target.name + "_" + id + "_" + std::to_string(q + 1));
      if (bank.is_graded(i)) {
        for (Eigen::Index m = 0; m < bank.thresholds[i].size(); ++m)
          bg.columns.push_back("bg_" + id + "_" + std::to_string(m + 1));
      } else {
        b.columns.push_back("b_" + id);
        if (bank.specs[i].guessing) c.columns.push_back("c_" + id);
      }
    }
    for (int j = 0; j < theta_subjects; ++j)
      for (int k = 0; k < spec.levels(); ++k)
        for (int q = 0; q < spec.traits[k]; ++q)
          theta.columns.push_back("theta_" + std::to_string(k + 1) + "_" + std::to_string(q + 1) + "_" +
                                  std::to_string(j + 1));
    for (auto* g : {&lambda, &a, &b, &c, &ag, &bg, &theta}) {
      if (g->columns.empty()) continue;
      g->draws = Matrix::Zero(rows, static_cast<Eigen::Index>(g->columns.size()));
      groups.push_back(std::move(*g));
    }
  }

  void record(int row, const ModelState& st, const HierarchySpec& spec, int theta_subjects) {
    const auto& bank = st.items;
    for (auto& g : groups) {
      Eigen::Index col = 0;
      auto put = [&](double v) { g.draws(row, col++) = v; };
      if (g.name == "lambda") {
        for (const auto& l : st.lambda)
          for (Eigen::Index q = 0; q < l.size(); ++q) put(l(q));
      } else if (g.name == "a" || g.name == "ag") {
        const bool graded = g.name == "ag";
        for (int i = 0; i < bank.size(); ++i)
          if (bank.is_graded(i) == graded)
            for (int q : bank.specs[i].loads) put(bank.a(i, q));
      } else if (g.name == "b") {
        for (int i = 0; i < bank.size(); ++i)
          if (!bank.is_graded(i)) put(bank.b(i));
      } else if (g.name == "c") {
        for (int i = 0; i < bank.size(); ++i)
          if (!bank.is_graded(i) && bank.specs[i].guessing) put(bank.c(i));
      } else if (g.name == "bg") {
        for (int i = 0; i < bank.size(); ++i)
          if (bank.is_graded(i))
            for (Eigen::Index m = 0; m < bank.thresholds[i].size(); ++m) put(bank.thresholds[i](m));
      } else if (g.name == "theta") {
        for (int j = 0; j < theta_subjects; ++j)
          for (int k = 0; k < spec.levels(); ++k)
            for (Eigen::Index q = 0; q < st.traits.theta[k].rows(); ++q) put(st.traits.theta[k](q, j));
      }
    }
  }
};

}  // namespace

ChainTrace run_chain(const ModelInputs& inputs, const SamplerConfig& config, const SweepObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  GibbsSampler sampler(inputs, config);
  const auto& spec = inputs.hierarchy;
  const int burnin = config.resolved_burnin();
  const int thin = std::max(config.thin, 1);
  const int subjects = inputs.responses.subjects();
  const int theta_subjects = std::min(config.trace_theta_subjects, subjects);

  ChainTrace trace;
  trace.seed = config.seed;
  trace.config = config;
  TraceLayout layout;
  layout.init(sampler.state(), spec, theta_subjects, config.stored_draws());
  for (int k = 0; k < spec.levels(); ++k) {
    trace.theta_mean.push_back(Matrix::Zero(spec.traits[k], subjects));
    trace.theta_sd.push_back(Matrix::Zero(spec.traits[k], subjects));
  }

  int window_index = 0;
  int stored = 0;
  for (int it = 0; it < config.iterations; ++it) {
    if (it == burnin) sampler.reset_acceptance();
    sampler.sweep(it);
    if (it < burnin && config.adapt && (it + 1) % config.adapt_window == 0) sampler.adapt(++window_index);
    if (it >= burnin && (it - burnin + 1) % thin == 0 && stored < config.stored_draws()) {
      layout.record(stored, sampler.state(), spec, theta_subjects);
      for (int k = 0; k < spec.levels(); ++k) {
        trace.theta_mean[k] += sampler.state().traits.theta[k];
        trace.theta_sd[k] += sampler.state().traits.theta[k].cwiseAbs2();
      }
      ++stored;
    }
    if (observer) observer(it, sampler.state());
  }
  if (burnin == config.iterations) sampler.reset_acceptance();

  for (int k = 0; k < spec.levels(); ++k) {
    if (stored == 0) continue;
    auto& mean = trace.theta_mean[k];
    auto& sd = trace.theta_sd[k];
    mean /= stored;
    if (stored > 1) {
      sd = ((sd - stored * mean.cwiseAbs2()) / (stored - 1)).cwiseMax(0.0).cwiseSqrt();
    } else {
      sd.setZero();
    }
  }
  trace.groups = std::move(layout.groups);
  trace.acceptance = sampler.acceptance();
  trace.stored = stored;
  trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

}  // namespace hiermirt
