#include "kgap/common/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "kgap/common/hash.hpp"

namespace kgap {

Rng Rng::for_key(std::uint64_t base_seed, std::string_view key) {
  std::string material = std::to_string(base_seed);
  material.push_back('\x1f');
  material.append(key);
  return Rng(sha256_u64(material));
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Reject the top partial block so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace kgap
