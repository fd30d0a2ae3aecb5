#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kgap {

// Reproducible random source.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard library distributions are implementation-defined,
// so the variates below are derived from raw engine output with fixed
// formulas: identical seeds give identical draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Seed derived from an arbitrary key (SHA-256 of the key bytes mixed with
  // the base seed). Lets independent strata or prompts draw independent
  // streams without depending on iteration order.
  static Rng for_key(std::uint64_t base_seed, std::string_view key);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal by Box-Muller (uses two uniforms per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace kgap
