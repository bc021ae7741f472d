#pragma once

#include <cstdint>
#include <random>

namespace omcs {

// Default random engine used by every randomized policy.
using Rng = std::mt19937_64;

// SplitMix64 finalizer. Stable across platforms and standard libraries.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Sub-seed for stream `index` under master `seed`:
//   derive_seed(s, i) = splitmix64(splitmix64(s) ^ splitmix64(i + golden))
// Distinct indices give statistically independent engines.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1) built from the top 53 bits. Unlike
// std::uniform_real_distribution this is bit-identical on every stdlib.
template <class Urbg>
double uniform01(Urbg& g) {
  static_assert(Urbg::max() - Urbg::min() == ~std::uint64_t{0},
                "uniform01 expects a full 64-bit engine");
  return static_cast<double>((g() - Urbg::min()) >> 11) * 0x1.0p-53;
}

template <class Urbg>
bool bernoulli(Urbg& g, double p) {
  return uniform01(g) < p;
}

}  // namespace omcs
