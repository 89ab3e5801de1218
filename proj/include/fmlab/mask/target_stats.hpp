#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/mask/coverage.hpp"
#include "fmlab/mask/thinning.hpp"

namespace fmlab::mask {

/// ceil(fraction * n) with a guard against round-off (0.1 * 500 is 50.000000000000007).
inline std::size_t ceil_count(double fraction, std::size_t n) {
  const double exact = fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

struct TargetStats {
  std::vector<std::size_t> used;   ///< indices of the inspected masks, ascending
  std::vector<double> histogram;   ///< empirical class distribution, sums to 1
  /// Foreground area over skeleton length, averaged over inspected masks with a
  /// nonempty skeleton (0 when there is none). A proxy for stroke width.
  double mean_width = 0.0;
  double mean_coverage = 0.0;
};

/// Stroke-width proxy of one mask: area / skeleton pixel count.
inline double stroke_width(const BinaryMask& m) {
  const std::size_t skel = zhang_suen_thin(m).count();
  return skel == 0 ? 0.0 : static_cast<double>(m.count()) / static_cast<double>(skel);
}

/// Inspects ceil(fraction * N) masks chosen by a seeded partial shuffle and summarises
/// their coverage-class distribution and stroke width.
inline TargetStats estimate_target_stats(std::span<const BinaryMask> masks, double fraction,
                                         const CoverageBinning& bins, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("target fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t take = ceil_count(fraction, masks.size());
  if (masks.empty() || take == 0) throw DomainError("estimate_target_stats: empty subsample");

  std::vector<std::size_t> order(masks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(take);
  std::sort(order.begin(), order.end());

  TargetStats st;
  st.used = order;
  st.histogram.assign(static_cast<std::size_t>(bins.classes()), 0.0);
  double width_sum = 0.0;
  std::size_t width_n = 0;
  for (auto i : order) {
    const double rho = coverage(masks[i]);
    st.mean_coverage += rho;
    st.histogram[static_cast<std::size_t>(bins.assign(rho))] += 1.0;
    const double w = stroke_width(masks[i]);
    if (w > 0.0) {
      width_sum += w;
      ++width_n;
    }
  }
  for (auto& h : st.histogram) h /= static_cast<double>(take);
  st.mean_coverage /= static_cast<double>(take);
  st.mean_width = width_n ? width_sum / static_cast<double>(width_n) : 0.0;
  return st;
}

/// Splits `total` draws across classes proportionally to `histogram` by the
/// largest-remainder rule; ties go to the lower class. Counts sum to `total`.
inline std::vector<std::size_t> apportion(const std::vector<double>& histogram, std::size_t total) {
  const double mass = std::accumulate(histogram.begin(), histogram.end(), 0.0);
  if (!(mass > 0.0)) throw DomainError("apportion: histogram has no mass");
  std::vector<std::size_t> counts(histogram.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < histogram.size(); ++c) {
    const double exact = histogram[c] / mass * static_cast<double>(total);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
  return counts;
}

}  // namespace fmlab::mask
