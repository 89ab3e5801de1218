#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fmlab {

/// The seeded source every stochastic operation takes by reference. Callers own it.
using Rng = std::mt19937_64;

/// SplitMix64 finaliser: decorrelates (base seed, index) pairs into independent streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<double> standard_normal(Rng& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = normal(rng);
  return out;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace fmlab
