#pragma once

#include <array>
#include <cstdint>

namespace anchoralign {

// xoshiro256** seeded through splitmix64. The stream for a given seed is part
// of the toolkit's reproducibility contract and must never change.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  // Independent stream keyed by (seed, stream), e.g. one per training epoch.
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n); n must be > 0. Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via the Marsaglia polar method.
  double normal();

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  void reseed(std::uint64_t mixed);

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace anchoralign
