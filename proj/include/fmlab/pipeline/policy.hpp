#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/mask/coverage.hpp"
#include "fmlab/mask/target_stats.hpp"

// Output cardinalities of the synthesis policies, as pure functions.

namespace fmlab::pipeline {

struct PolicyConfig {
  std::uint64_t k = 16;
  double target_fraction = 0.1;
  double target_multiplier = 4.0;
  mask::CoverageBinning bins = mask::CoverageBinning::standard();
  int ode_steps = 50;
  std::optional<double> cfg_omega = 1.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (!(target_fraction > 0.0 && target_fraction <= 1.0)) throw ConfigError("target_fraction must lie in (0, 1]");
    if (!(target_multiplier > 0.0)) throw ConfigError("target_multiplier must be > 0");
    if (ode_steps < 1) throw ConfigError("ode steps must be >= 1");
  }
};

/// k synthetic pairs per real training pair.
inline std::uint64_t indomain_count(std::uint64_t real_count, std::uint64_t k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  return real_count * k;
}

/// ceil(multiplier * x_target), guarded against products like 4 * 0.1 * 1000 landing
/// a hair above an integer.
inline std::uint64_t crossdomain_count(std::uint64_t target_count, double multiplier) {
  if (!(multiplier > 0.0)) throw ConfigError("target_multiplier must be > 0");
  return mask::ceil_count(multiplier, static_cast<std::size_t>(target_count));
}

/// Number of target masks inspected for statistics.
inline std::uint64_t stats_count(std::uint64_t target_count, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("target_fraction must lie in (0, 1]");
  return std::max<std::uint64_t>(1, mask::ceil_count(fraction, static_cast<std::size_t>(target_count)));
}

inline constexpr const char* kSplitRule =
    "split rounding: floor(fraction * n) per split, leftover records to the largest fractional parts, ties to the "
    "earlier split";

inline void check_fractions(const std::vector<double>& fractions) {
  if (fractions.empty()) throw ConfigError("no split fractions given");
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  const double sum = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
}

/// Records per split for n records; see kSplitRule.
inline std::vector<std::size_t> split_counts(std::size_t n, const std::vector<double>& fractions) {
  check_fractions(fractions);
  return mask::apportion(fractions, n);
}

/// Class label per synthetic sample: counts from apportioning the histogram, laid
/// out class by class.
inline std::vector<int> class_plan(const std::vector<double>& histogram, std::size_t total) {
  const auto counts = mask::apportion(histogram, total);
  std::vector<int> labels;
  labels.reserve(total);
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  return labels;
}

/// Seeded Fisher-Yates permutation of 0..n-1. Uses its own bounded draw so the
/// order does not depend on the standard library's distribution implementation.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    std::swap(p[i - 1], p[static_cast<std::size_t>(r % bound)]);
  }
  return p;
}

}  // namespace fmlab::pipeline
