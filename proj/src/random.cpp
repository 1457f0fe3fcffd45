#include "hiermirt/random.hpp"

#include <cmath>
#include <stdexcept>

namespace hiermirt {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Standardized lower tail bound (lower, inf) with lower >= 0, optionally capped at upper.
double exponential_tail(Rng& rng, double lower, double upper) {
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double x = lower + rng.exponential(rate);
    if (x >= upper) continue;
    const double d = x - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return x;
  }
}

double uniform_interval(Rng& rng, double lower, double upper) {
  // Reference point where exp(-x^2/2) peaks inside the interval.
  const double ref = lower > 0.0 ? lower : (upper < 0.0 ? upper : 0.0);
  for (;;) {
    const double x = lower + (upper - lower) * rng.uniform();
    if (rng.uniform() <= std::exp(0.5 * (ref * ref - x * x))) return x;
  }
}

double normal_rejection(Rng& rng, double lower, double upper) {
  for (;;) {
    const double x = rng.normal();
    if (x > lower && x < upper) return x;
  }
}

// Standard normal truncated to (lower, upper).
double standard_truncated(Rng& rng, double lower, double upper) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (upper <= 0.0 && lower > -inf) return -standard_truncated(rng, -upper, -lower);
  if (upper == inf && lower == -inf) return rng.normal();
  if (upper == inf) {
    if (lower < 0.45) return normal_rejection(rng, lower, upper);
    return exponential_tail(rng, lower, upper);
  }
  if (lower == -inf) return -standard_truncated(rng, -upper, inf);
  const double width = upper - lower;
  if (lower < 0.0) {
    // Interval straddles zero.
    if (width > 2.5066282746310002) return normal_rejection(rng, lower, upper);
    return uniform_interval(rng, lower, upper);
  }
  if (width * (2.0 * lower + width) <= 2.0) return uniform_interval(rng, lower, upper);
  return exponential_tail(rng, lower, upper);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& w : s_) w = splitmix64(st);
}

Rng::result_type Rng::operator()() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double Rng::exponential(double rate) { return std::exponential_distribution<double>(rate)(*this); }

double Rng::gamma(double shape) { return std::gamma_distribution<double>(shape)(*this); }

double Rng::beta(double alpha, double beta) {
  const double x = gamma(alpha);
  const double y = gamma(beta);
  return x / (x + y);
}

Rng StreamFactory::stream(std::uint32_t block, std::uint64_t entity) const {
  std::uint64_t st = seed_;
  std::uint64_t key = splitmix64(st);
  st = key ^ iteration_;
  key = splitmix64(st);
  st = key ^ (static_cast<std::uint64_t>(block) << 32);
  key = splitmix64(st);
  st = key ^ entity;
  return Rng(splitmix64(st));
}

double sample_truncated_normal(Rng& rng, double mean, double lower, double upper) {
  if (!(lower < upper)) throw std::logic_error("sample_truncated_normal: empty interval");
  return mean + standard_truncated(rng, lower - mean, upper - mean);
}

}  // namespace hiermirt
