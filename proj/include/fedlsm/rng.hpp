#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fedlsm {

// Mixes a base seed with a list of stream tags (round, client, iteration, ...)
// into an independent 64-bit seed. Uses splitmix64 finalization.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  // Beta(a, b) via the ratio of two gamma draws.
  double beta(double a, double b);

  // k distinct values from [0, n), in ascending order.
  std::vector<int> choose(int n, int k);

  template <class It> void shuffle(It first, It last) { std::shuffle(first, last, engine_); }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

} // namespace fedlsm
