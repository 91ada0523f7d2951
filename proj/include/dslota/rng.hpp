#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dslota {

// Seeded generator handed explicitly to every stochastic routine. Streams for
// concurrent tasks are derived from (master seed, keys...) so that results do
// not depend on scheduling order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
  }
  // Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Purpose tags keep streams for different consumers disjoint.
enum class Stream : std::uint64_t {
  kData = 1,
  kPartition = 2,
  kInit = 3,
  kTraining = 4,
  kCoefficients = 5,
  kChannel = 6,
  kNoise = 7,
  kEvalSet = 8,
};

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic child seed for (master, purpose, keys...).
std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                          std::initializer_list<std::uint64_t> keys = {});

inline Rng derive_rng(std::uint64_t master, Stream purpose,
                      std::initializer_list<std::uint64_t> keys = {}) {
  return Rng(derive_seed(master, purpose, keys));
}

}  // namespace dslota
