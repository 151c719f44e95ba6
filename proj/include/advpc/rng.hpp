#pragma once

#include <cstdint>

namespace advpc {

// Counter-based generator: the n-th draw is a pure function of (key, n).
// split() derives an independent child stream, so every stochastic
// operation can take an explicit seed and sub-tasks never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  Rng split(std::uint64_t tag) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal (Box-Muller, second variate cached).
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace advpc
