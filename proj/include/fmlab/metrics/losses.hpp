#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/metrics/segmentation.hpp"

namespace fmlab::metrics {

/// Focal Tversky weights; defaults are the segmentation setting used for crack masks,
/// where beta > alpha favours recall of the thin foreground.
struct TverskyParams {
  double alpha = 0.3;
  double beta = 0.75;
  double gamma = 1.33;
  /// Added to numerator and denominator so an empty ground truth does not give 0/0.
  double smooth = 1e-6;

  void validate() const {
    if (!(alpha > 0.0 && beta > 0.0)) throw DomainError("tversky alpha and beta must be > 0");
    if (!(gamma > 0.0)) throw DomainError("tversky gamma must be > 0");
  }
};

namespace detail {

struct SoftCounts {
  double tp = 0.0, fp = 0.0, fn = 0.0;
};

inline SoftCounts soft_counts(const Field& probs, const mask::BinaryMask& gt) {
  SoftCounts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs.values[i];
    const double y = gt.bits()[i] ? 1.0 : 0.0;
    c.tp += p * y;
    c.fp += p * (1.0 - y);
    c.fn += (1.0 - p) * y;
  }
  return c;
}

inline void check_probs(const Field& probs, const mask::BinaryMask& gt) {
  require_match(probs, gt, "focal_tversky");
  for (double p : probs.values) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("focal_tversky: probabilities must lie in [0, 1]");
  }
}

}  // namespace detail

/// Tversky index T = (TP + s) / (TP + alpha FP + beta FN + s) on soft counts.
inline double tversky_index(const Field& probs, const mask::BinaryMask& gt, const TverskyParams& prm = {}) {
  prm.validate();
  detail::check_probs(probs, gt);
  const auto c = detail::soft_counts(probs, gt);
  return (c.tp + prm.smooth) / (c.tp + prm.alpha * c.fp + prm.beta * c.fn + prm.smooth);
}

/// (1 - T)^gamma.
inline double focal_tversky(const Field& probs, const mask::BinaryMask& gt, const TverskyParams& prm = {}) {
  const double t = tversky_index(probs, gt, prm);
  return std::pow(std::max(0.0, 1.0 - t), prm.gamma);
}

/// d focal_tversky / d p_i for every pixel.
inline std::vector<double> focal_tversky_grad(const Field& probs, const mask::BinaryMask& gt,
                                              const TverskyParams& prm = {}) {
  prm.validate();
  detail::check_probs(probs, gt);
  const auto c = detail::soft_counts(probs, gt);
  const double num = c.tp + prm.smooth;
  const double den = c.tp + prm.alpha * c.fp + prm.beta * c.fn + prm.smooth;
  const double t = num / den;
  const double one_minus = std::max(0.0, 1.0 - t);
  const double outer = one_minus > 0.0 ? -prm.gamma * std::pow(one_minus, prm.gamma - 1.0) : 0.0;
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double y = gt.bits()[i] ? 1.0 : 0.0;
    const double d_num = y;
    const double d_den = y + prm.alpha * (1.0 - y) - prm.beta * y;
    g[i] = outer * (d_num * den - num * d_den) / (den * den);
  }
  return g;
}

/// Soft boundary target: Sobel gradient magnitude of the ground truth, divided by
/// its maximum. Borders replicate the edge pixel, so a constant mask has no edges.
inline Field sobel_edge_target(const mask::BinaryMask& gt) {
  const long w = static_cast<long>(gt.width()), h = static_cast<long>(gt.height());
  auto px = [&](long x, long y) {
    x = std::clamp(x, 0L, w - 1);
    y = std::clamp(y, 0L, h - 1);
    return gt.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) ? 1.0 : 0.0;
  };
  Field f{gt.width(), gt.height(), std::vector<double>(gt.size())};
  double peak = 0.0;
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const double mag = std::hypot(gx, gy);
      f.values[static_cast<std::size_t>(y * w + x)] = mag;
      peak = std::max(peak, mag);
    }
  }
  if (peak > 0.0)
    for (auto& v : f.values) v /= peak;
  return f;
}

inline double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// Mean binary cross-entropy between sigmoid(logits) and soft targets, evaluated
/// in the logit domain so saturated logits stay finite.
inline double bce_with_logits(const Field& logits, const Field& target) {
  if (logits.size() != target.size()) throw DimensionError("bce: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits.values[i], e = target.values[i];
    acc += std::max(z, 0.0) - z * e + std::log1p(std::exp(-std::abs(z)));
  }
  return acc / static_cast<double>(logits.size());
}

/// Linear warm-up factor of the boundary term: ramps from 0 to 1 over the first
/// `warmup_fraction` of training, then stays at 1.
inline double boundary_warmup_scale(double epoch, double total_epochs, double warmup_fraction = 0.1) {
  if (!(total_epochs > 0.0)) throw DomainError("warm-up needs a positive epoch count");
  const double span = warmup_fraction * total_epochs;
  if (span <= 0.0) return 1.0;
  return std::clamp(epoch / span, 0.0, 1.0);
}

struct CombinedLossParams {
  double lambda_ft = 0.8;
  double eta = 0.2;
  TverskyParams tversky{};
};

struct CombinedLoss {
  double focal_tversky = 0.0;
  double boundary_bce = 0.0;
  double total = 0.0;
};

/// lambda FT(sigmoid(z), y) + eta * warmup_scale * BCE(sigmoid(z), sobel(y)).
inline CombinedLoss combined_loss(const Field& logits, const mask::BinaryMask& gt, const CombinedLossParams& prm,
                                  double warmup_scale) {
  require_match(logits, gt, "combined_loss");
  if (!(warmup_scale >= 0.0 && warmup_scale <= 1.0)) throw DomainError("warmup_scale must lie in [0, 1]");
  for (double z : logits.values) {
    if (!std::isfinite(z)) throw NumericError("combined_loss: logits must be finite");
  }
  Field probs = logits;
  for (auto& v : probs.values) v = sigmoid(v);
  CombinedLoss out;
  out.focal_tversky = focal_tversky(probs, gt, prm.tversky);
  out.boundary_bce = bce_with_logits(logits, sobel_edge_target(gt));
  out.total = prm.lambda_ft * out.focal_tversky + prm.eta * warmup_scale * out.boundary_bce;
  return out;
}

}  // namespace fmlab::metrics
