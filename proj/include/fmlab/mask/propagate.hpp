#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/mask/components.hpp"
#include "fmlab/mask/morphology.hpp"

namespace fmlab::mask {

struct PropagationPolicy {
  int variants = 3;
  int max_dilate = 1;
  int max_erode = 1;
  int jitter_px = 1;
  /// Probability of an extra local thinning/thickening step inside a random window.
  /// Thickening needs max_dilate > 0, thinning needs max_erode > 0.
  double local_edit_prob = 0.5;
  bool preserve_connectivity = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (variants < 1) throw ConfigError("propagation needs at least one variant");
    if (max_dilate < 0 || max_erode < 0 || jitter_px < 0) throw ConfigError("propagation radii must be >= 0");
    if (!(local_edit_prob >= 0.0 && local_edit_prob <= 1.0)) throw ConfigError("local_edit_prob must lie in [0, 1]");
  }
};

struct PropagatedMask {
  BinaryMask mask;
  /// Human-readable recipe, e.g. "dilate=1 erode=0 local=thin@(2,3,6,7) shift=(1,-1)".
  std::string provenance;
};

namespace detail {

inline bool satisfies(const BinaryMask& candidate, std::size_t original_components) {
  return !candidate.empty() && component_count(candidate) <= original_components;
}

}  // namespace detail

/// Generates one structure-preserving variant. Depends only on (m, policy, index).
///
/// The recipe is drawn up front: global dilations, global erosions, an optional
/// local thickening or thinning restricted to a random window, and an integer
/// translation. When preserve_connectivity is set and the result is empty or has
/// more components than the input, the variant falls back to the translation
/// alone, then to the unchanged mask.
inline PropagatedMask propagate_one(const BinaryMask& m, const PropagationPolicy& policy, std::uint64_t index) {
  Rng rng(derive_seed(policy.seed, index));
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const int n_dilate = pick(0, policy.max_dilate);
  const int n_erode = pick(0, policy.max_erode);
  const bool local_draw = uniform01(rng) < policy.local_edit_prob;
  const bool coin = pick(0, 1) == 1;
  const bool can_thicken = policy.max_dilate > 0, can_thin = policy.max_erode > 0;
  const bool local = local_draw && (can_thicken || can_thin);
  const bool local_thicken = can_thicken && can_thin ? coin : can_thicken;
  const std::size_t win_w = std::max<std::size_t>(1, m.width() / 2);
  const std::size_t win_h = std::max<std::size_t>(1, m.height() / 2);
  Window win;
  win.x0 = static_cast<std::size_t>(pick(0, static_cast<int>(m.width() - win_w)));
  win.y0 = static_cast<std::size_t>(pick(0, static_cast<int>(m.height() - win_h)));
  win.x1 = win.x0 + win_w;
  win.y1 = win.y0 + win_h;
  const int dx = pick(-policy.jitter_px, policy.jitter_px);
  const int dy = pick(-policy.jitter_px, policy.jitter_px);

  BinaryMask v = dilate_n(m, n_dilate);
  v = erode_n(v, n_erode);
  std::string recipe = "dilate=" + std::to_string(n_dilate) + " erode=" + std::to_string(n_erode);
  if (local) {
    v = splice(v, local_thicken ? dilate(v) : erode(v), win);
    recipe += std::string(" local=") + (local_thicken ? "thicken" : "thin") + "@(" + std::to_string(win.x0) + "," +
              std::to_string(win.y0) + "," + std::to_string(win.x1) + "," + std::to_string(win.y1) + ")";
  }
  v = translate(v, dx, dy);
  const std::string shift = " shift=(" + std::to_string(dx) + "," + std::to_string(dy) + ")";
  recipe += shift;

  if (!policy.preserve_connectivity) return {std::move(v), recipe};

  const std::size_t original = component_count(m);
  if (detail::satisfies(v, original)) return {std::move(v), recipe};
  BinaryMask jitter_only = translate(m, dx, dy);
  if (detail::satisfies(jitter_only, original)) {
    return {std::move(jitter_only), "fallback=jitter-only" + shift + " (rejected: " + recipe + ")"};
  }
  return {m, "fallback=identity (rejected: " + recipe + ")"};
}

/// K structure-preserving variants of `m`; variant j is propagate_one(m, policy, j).
inline std::vector<PropagatedMask> propagate(const BinaryMask& m, const PropagationPolicy& policy) {
  policy.validate();
  if (policy.preserve_connectivity && m.empty()) {
    throw DomainError("propagate: connectivity-preserving propagation needs a nonempty mask");
  }
  std::vector<PropagatedMask> out;
  out.reserve(static_cast<std::size_t>(policy.variants));
  for (int j = 0; j < policy.variants; ++j) out.push_back(propagate_one(m, policy, static_cast<std::uint64_t>(j)));
  return out;
}

}  // namespace fmlab::mask
