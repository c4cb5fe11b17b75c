#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace relstance {

/// Seeded generator. Streams are derived from a base seed plus stream tags so
/// independent consumers (initialization, sampling, shuffling) never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace relstance
