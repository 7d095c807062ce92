#pragma once

#include <cstdint>
#include <random>

namespace allact {

// SplitMix64 finalizer applied to (seed, stream). Streams derived from the
// same seed with different indices are statistically independent, and the
// result depends only on the two integers, never on generator state.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);

// Named stream indices so that every consumer of randomness in a run draws
// from its own sequence. Two runs that differ only in estimator kind share
// the rollout and critic streams.
enum class Stream : std::uint64_t {
  kInit = 1,
  kRollout = 2,
  kCritic = 3,
  kEstimator = 4,
  kReference = 5,
  kSweep = 6,
  kOracle = 7,
  kTheorem = 8,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Rng Split(std::uint64_t stream) const { return Rng(DeriveSeed(seed_, stream)); }
  Rng Split(Stream stream) const {
    return Split(static_cast<std::uint64_t>(stream));
  }

  double Normal() { return normal_(engine_); }
  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::size_t Index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace allact
