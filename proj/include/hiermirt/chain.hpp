#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hiermirt/model.hpp"
#include "hiermirt/random.hpp"
#include "hiermirt/sampler.hpp"

namespace hiermirt {

struct SamplerConfig {
  int iterations = 2000;
  int burnin = -1;  ///< -1: half of the iterations
  int thin = 1;
  std::uint64_t seed = 1;

  std::optional<Priors> priors;  ///< defaults when unset

  double lambda_step = 0.05;
  double threshold_translate_step = 0.05;
  double threshold_spread_step = 0.05;
  int adapt_window = 50;
  bool adapt = true;
  double target_scalar = 0.44;
  double target_block = 0.234;

  double init_lambda = 0.5;
  bool sample_items = true;              ///< false: item parameters stay at their initial values
  std::optional<Loadings> fixed_lambda;  ///< lambda held at these values
  int trace_theta_subjects = 0;          ///< store full theta draws for the first n subjects

  int resolved_burnin() const { return burnin < 0 ? iterations / 2 : burnin; }
  int stored_draws() const;
  /// Throws InputError on inconsistent settings.
  void validate() const;
};

/// What the sampler is fitted to. `items` carries the structure and, when
/// `items_initialized`, the starting (or fixed) parameter values.
struct ModelInputs {
  HierarchySpec hierarchy;
  ItemBank items;
  ResponseMatrix responses;
  bool items_initialized = false;
  std::optional<Loadings> initial_lambda;
  std::optional<LatentState> initial_traits;
};

struct TraceGroup {
  std::string name;
  std::vector<std::string> columns;
  Matrix draws;  ///< stored iterations x columns
};

struct BlockAcceptance {
  std::string block;
  long accepted = 0;
  long proposed = 0;
  double scale = 0.0;  ///< final (frozen) proposal scale

  double rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct ChainTrace {
  std::uint64_t seed = 0;
  SamplerConfig config;
  std::vector<TraceGroup> groups;
  std::vector<Matrix> theta_mean;  ///< posterior means, Q_k x J per level
  std::vector<Matrix> theta_sd;
  std::vector<BlockAcceptance> acceptance;  ///< post burn-in counts
  int stored = 0;
  double seconds = 0.0;

  const TraceGroup* group(const std::string& name) const;
};

/// Identifies the RNG substream of each block.
enum class Block : std::uint32_t { zx = 10, ab, lambda, theta, c, xg, ag, bg, init };

/// Called after every completed sweep with the 0-based iteration.
using SweepObserver = std::function<void(int, const ModelState&)>;

/// State machine of one chain. Blocks run in the order
/// (X, Z) (a, b) (lambda) (theta) (c) (X^G) (a^G) (b^G).
class GibbsSampler {
 public:
  GibbsSampler(ModelInputs inputs, SamplerConfig config);

  void sweep(int iteration);

  void update_zx(const StreamFactory& streams);
  void update_ab(const StreamFactory& streams);
  void update_lambda(const StreamFactory& streams);
  void update_theta(const StreamFactory& streams);
  void update_c(const StreamFactory& streams);
  void update_xg(const StreamFactory& streams);
  void update_ag(const StreamFactory& streams);
  void update_bg(const StreamFactory& streams);

  /// Full conditionals at the current state, as used by the updates.
  Gaussian ab_conditional(int item) const;
  Gaussian ag_conditional(int item) const;
  BetaParams c_conditional(int item) const;
  ThetaConditional theta_conditional(int subject) const;

  const ModelState& state() const { return state_; }
  ModelState& mutable_state() { return state_; }
  const ModelInputs& inputs() const { return inputs_; }
  const SamplerConfig& config() const { return config_; }
  const Priors& priors() const { return priors_; }

  /// Proposal scales and acceptance counters per MH block.
  std::vector<BlockAcceptance>& acceptance() { return mh_; }
  void reset_acceptance();
  /// Applies adapt_step_size to every MH block over the last window.
  void adapt(int window_index);

 private:
  void initialize();
  BlockAcceptance& lambda_block(int level, int trait);
  BlockAcceptance& translate_block(int item);
  BlockAcceptance& spread_block(int item);

  ModelInputs inputs_;
  SamplerConfig config_;
  Priors priors_;
  ModelState state_;
  std::vector<BlockAcceptance> mh_;
  std::vector<BlockAcceptance> window_;
  std::vector<int> lambda_index_;  ///< first mh_ slot per level
  int threshold_index_ = 0;        ///< first mh_ slot of graded items
  std::vector<int> graded_slot_;   ///< item -> graded ordinal, -1 for dichotomous
};

ChainTrace run_chain(const ModelInputs& inputs, const SamplerConfig& config, const SweepObserver& observer = {});

/// Quantile-matched starting thresholds from observed category frequencies.
Vector initial_thresholds(std::span<const int> scores, int categories);

/// Width of data-parallel loops: HIERMIRT_THREADS (0 or unset = hardware).
int parallel_width();

}  // namespace hiermirt
