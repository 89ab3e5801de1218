#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fmlab/cond/feature_map.hpp"
#include "fmlab/core/error.hpp"
#include "fmlab/mask/binary_mask.hpp"
#include "fmlab/mask/morphology.hpp"

namespace fmlab::cond {

/// Group normalisation without affine: each group of C/groups channels is shifted
/// to zero mean and scaled to unit variance over channels x pixels.
inline FeatureMap group_norm(const FeatureMap& h, std::size_t groups, double eps = 1e-5) {
  if (groups == 0 || h.channels() % groups != 0) {
    throw DimensionError("group_norm: " + std::to_string(groups) + " groups do not divide " +
                         std::to_string(h.channels()) + " channels");
  }
  if (!(eps > 0.0)) throw DomainError("group_norm: eps must be > 0");
  FeatureMap out(h.channels(), h.height(), h.width());
  const std::size_t per_group = (h.channels() / groups) * h.pixels();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t begin = g * per_group;
    double mean = 0.0;
    for (std::size_t i = 0; i < per_group; ++i) mean += h.data()[begin + i];
    mean /= static_cast<double>(per_group);
    double var = 0.0;
    for (std::size_t i = 0; i < per_group; ++i) {
      const double d = h.data()[begin + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(per_group);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < per_group; ++i) out.data()[begin + i] = (h.data()[begin + i] - mean) * inv;
  }
  return out;
}

/// Lite-SPADE mask encoder: shared 3x3 conv + ReLU on the two-channel one-hot mask,
/// then separate 3x3 heads for the per-pixel scale gamma and shift beta.
struct SpadeParams {
  Conv3x3 shared;      // 2 -> hidden
  Conv3x3 gamma_head;  // hidden -> C
  Conv3x3 beta_head;   // hidden -> C
  std::size_t groups = 1;

  SpadeParams() = default;
  SpadeParams(std::size_t feature_channels, std::size_t hidden, std::size_t group_count)
      : shared(2, hidden), gamma_head(hidden, feature_channels), beta_head(hidden, feature_channels),
        groups(group_count) {
    if (group_count == 0 || feature_channels % group_count != 0) {
      throw DimensionError("spade: group count must divide the feature channels");
    }
  }

  /// gamma = 1, beta = 0 everywhere: the modulation is the identity.
  static SpadeParams identity(std::size_t feature_channels, std::size_t hidden = 4, std::size_t group_count = 1) {
    SpadeParams p(feature_channels, hidden, group_count);
    std::fill(p.gamma_head.bias.begin(), p.gamma_head.bias.end(), 1.0);
    return p;
  }

  std::size_t channels() const { return gamma_head.out; }
};

/// Mask as a 2-channel (foreground, background) feature map at (height, width),
/// resized by nearest neighbour so it stays one-hot.
inline FeatureMap mask_one_hot(const mask::BinaryMask& m, std::size_t height, std::size_t width) {
  const mask::BinaryMask r =
      (m.height() == height && m.width() == width) ? m : mask::resize_nearest(m, width, height);
  return FeatureMap(2, height, width, mask::one_hot(r));
}

struct SpadeMaps {
  FeatureMap gamma;
  FeatureMap beta;
};

inline SpadeMaps spade_maps(const mask::BinaryMask& m, const SpadeParams& p, std::size_t height, std::size_t width) {
  const FeatureMap emb = relu(p.shared(mask_one_hot(m, height, width)));
  return {p.gamma_head(emb), p.beta_head(emb)};
}

/// h_out(x) = gamma(M)_x * h_norm(x) + beta(M)_x.
inline FeatureMap spade_modulate(const FeatureMap& h_norm, const mask::BinaryMask& m, const SpadeParams& p) {
  if (p.channels() != h_norm.channels()) throw DimensionError("spade: head channels differ from feature channels");
  auto [gamma, beta] = spade_maps(m, p, h_norm.height(), h_norm.width());
  FeatureMap out(h_norm.channels(), h_norm.height(), h_norm.width());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = gamma.data()[i] * h_norm.data()[i] + beta.data()[i];
  return out;
}

/// Morphological gradient G = dilate(M) - erode(M) with the 3x3 square under zero
/// padding, optionally widened by `thicken` extra dilations. Values are 0 or 1.
inline Raster boundary_map(const mask::BinaryMask& m, int thicken = 0) {
  if (thicken < 0) throw DomainError("boundary_map: thicken must be >= 0");
  const auto se = mask::StructuringElement::square();
  mask::BinaryMask edge = mask::difference(mask::dilate(m, se), mask::erode(m, se));
  edge = mask::dilate_n(edge, thicken, se);
  Raster g{m.height(), m.width(), std::vector<double>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i) g.values[i] = edge.bits()[i] ? 1.0 : 0.0;
  return g;
}

/// h_gated(x) = h_spade(x) (1 + gate_omega G(x)); G is broadcast over channels.
inline FeatureMap boundary_gate(const FeatureMap& h_spade, const Raster& g, double gate_omega) {
  if (g.height != h_spade.height() || g.width != h_spade.width()) {
    throw DimensionError("boundary_gate: gate raster does not match the feature map");
  }
  FeatureMap out = h_spade;
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t x = 0; x < out.width(); ++x) out.at(c, y, x) *= 1.0 + gate_omega * g.at(y, x);
  return out;
}

/// One decoder conditioning stage: group norm, SPADE, boundary gate. The gate gain
/// starts at 0, so a fresh block is plain SPADE.
struct ConditionedNorm {
  SpadeParams spade;
  double gate_omega = 0.0;
  int thicken = 0;
  double eps = 1e-5;

  FeatureMap operator()(const FeatureMap& h, const mask::BinaryMask& m) const {
    const FeatureMap normed = group_norm(h, spade.groups, eps);
    const FeatureMap modulated = spade_modulate(normed, m, spade);
    const mask::BinaryMask at_res =
        (m.height() == h.height() && m.width() == h.width()) ? m : mask::resize_nearest(m, h.width(), h.height());
    return boundary_gate(modulated, boundary_map(at_res, thicken), gate_omega);
  }
};

}  // namespace fmlab::cond
