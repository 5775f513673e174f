#include "txgen/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace txgen {

uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t hash_combine(uint64_t a, uint64_t b) {
  return mix64(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

RngStream::RngStream(uint64_t seed) : key_(seed) {
  // xoshiro256++ state seeded via splitmix64; avoids the all-zero state.
  uint64_t x = seed;
  for (auto& s : state_) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    s = z ^ (z >> 31);
  }
  if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0) {
    state_[0] = 1;
  }
}

RngStream RngStream::fork(uint64_t tag) const {
  return RngStream(hash_combine(key_, tag));
}

RngStream RngStream::fork(std::string_view tag) const {
  return fork(fnv1a64(tag));
}

static inline uint64_t rotl(uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

uint64_t RngStream::next_u64() {
  // xoshiro256++
  const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full range
  const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<int64_t>(v % span);
}

double RngStream::normal(double mean, double stddev) {
  // Box-Muller; consumes exactly two uniforms per call.
  double u1 = next_double();
  double u2 = next_double();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
}

double RngStream::lognormal(double log_median, double log_sigma) {
  return std::exp(normal(log_median, log_sigma));
}

double RngStream::pareto(double alpha, double x_min) {
  if (alpha <= 1.0) throw std::invalid_argument("pareto: alpha must exceed 1");
  double u = next_double();
  if (u <= 0.0) u = 0x1.0p-53;
  return x_min * std::pow(u, -1.0 / (alpha - 1.0));
}

double RngStream::exponential(double rate) {
  double u = next_double();
  if (u <= 0.0) u = 0x1.0p-53;
  return -std::log(u) / rate;
}

int64_t RngStream::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  // Single-uniform CDF inversion for small rates; keeps the draw monotone in
  // lambda for a fixed uniform. Larger rates split into small-rate chunks.
  if (lambda <= 12.0) {
    const double u = next_double();
    double p = std::exp(-lambda);
    double cdf = p;
    int64_t k = 0;
    const int64_t cap = static_cast<int64_t>(10.0 * lambda) + 100;
    while (u > cdf && k < cap) {
      ++k;
      p *= lambda / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  const int chunks = static_cast<int>(lambda / 10.0) + 1;
  const double part = lambda / chunks;
  int64_t total = 0;
  for (int i = 0; i < chunks; ++i) total += poisson(part);
  return total;
}

std::size_t RngStream::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) {
      throw std::invalid_argument("categorical: weights must be finite and >= 0");
    }
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("categorical: zero total weight");
  const double target = next_double() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  return weights.size() - 1;
}

}  // namespace txgen
