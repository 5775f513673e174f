// Deterministic, forkable random streams.
//
// Every stochastic component draws from an RngStream derived by fork() from
// a single root seed. fork() depends only on the stream's identity key and
// the tag, never on how many values were consumed, so substreams are stable
// under scheduling changes and partial replays.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace txgen {

// splitmix64 finalizer; good avalanche, used for key derivation and seeding.
uint64_t mix64(uint64_t x);
uint64_t hash_combine(uint64_t a, uint64_t b);
uint64_t fnv1a64(std::string_view s);

class RngStream {
 public:
  explicit RngStream(uint64_t seed);

  // Child stream identified by (key, tag); independent of draw position.
  RngStream fork(uint64_t tag) const;
  RngStream fork(std::string_view tag) const;

  uint64_t key() const { return key_; }

  uint64_t next_u64();
  double next_double();  // uniform [0, 1)
  double uniform(double lo, double hi);
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive bounds, unbiased

  double normal(double mean = 0.0, double stddev = 1.0);
  // log_median = median of log-values' exp, i.e. exp(log_median) is the
  // distribution median; log_sigma is the std of log-values.
  double lognormal(double log_median, double log_sigma);
  // Density p(x) ~ x^(-alpha) for x >= x_min (alpha > 1).
  double pareto(double alpha, double x_min);
  double exponential(double rate);
  int64_t poisson(double lambda);

  // Index sampled proportional to non-negative weights (at least one > 0).
  std::size_t categorical(std::span<const double> weights);

 private:
  uint64_t key_;
  std::array<uint64_t, 4> state_;
};

}  // namespace txgen
