#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace hiermirt {

/// xoshiro256++ generator. Cheap to construct, which is what makes one
/// substream per (iteration, block, entity) affordable.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal() { return normal_(*this); }
  double exponential(double rate);
  double gamma(double shape);
  double beta(double alpha, double beta);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t s_[4];
  std::normal_distribution<double> normal_;
};

/// Deterministic RNG substreams keyed by (master seed, iteration, block, entity).
/// Identical keys give identical streams regardless of thread scheduling.
class StreamFactory {
 public:
  StreamFactory(std::uint64_t seed, std::uint64_t iteration) : seed_(seed), iteration_(iteration) {}
  Rng stream(std::uint32_t block, std::uint64_t entity) const;
  std::uint64_t seed() const { return seed_; }
  std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t seed_;
  std::uint64_t iteration_;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// X ~ N(mean, 1) restricted to (lower, upper); infinite ends allowed.
/// Exact accept-reject (normal, half-interval uniform or translated
/// exponential proposals) so the deep tails stay unbiased.
double sample_truncated_normal(Rng& rng, double mean, double lower, double upper);

}  // namespace hiermirt
