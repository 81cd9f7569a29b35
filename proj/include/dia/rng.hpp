#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dia {

// mt19937_64 output is fixed by the standard, the <random> distributions are
// not, so everything that must be bit-reproducible draws through these.
using Rng = std::mt19937_64;

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) { return rng() % n; }

inline std::uint8_t uniform_byte(Rng& rng) { return static_cast<std::uint8_t>(rng() >> 56); }

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// [0, 1)
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller, one draw per call.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace dia
