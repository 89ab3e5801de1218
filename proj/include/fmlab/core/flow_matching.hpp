#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fmlab/core/condition.hpp"
#include "fmlab/core/error.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/core/sample.hpp"
#include "fmlab/core/schedule.hpp"

// Analytic flow-matching machinery. Every function here is pure: no model, no
// hidden state, RNG owned by the caller.
//
// The density path p_t generated by a velocity field v obeys the continuity equation
// d/dt p_t + div(v p_t) = 0. Regressing v onto the pairwise target velocity of an
// interpolant makes the probability-flow ODE dx/dt = v transport p_0 to the data.

namespace fmlab::fm {

namespace detail {

inline void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("t must lie in [0, 1], got " + std::to_string(t));
}

inline void check_triple(const Sample& x0, const Sample& x1, const Sample& xi, const char* what) {
  require_same_shape(x0, x1, what);
  require_same_shape(x0, xi, what);
}

inline Sample combine3(double a, const Sample& x0, double b, const Sample& x1, double c, const Sample& xi) {
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * x1[i] + c * xi[i];
  return Sample(x0.shape(), std::move(out));
}

}  // namespace detail

/// x_t = alpha(t) x0 + beta(t) x1 + g(t) xi.
inline Sample interpolate(const PathSchedule& sched, const Sample& x0, const Sample& x1, const Sample& xi,
                          double t) {
  detail::check_triple(x0, x1, xi, "interpolate");
  detail::check_time(t);
  return detail::combine3(sched.alpha(t), x0, sched.beta(t), x1, sched.g(t), xi);
}

/// u_t = d/dt x_t = alpha'(t) x0 + beta'(t) x1 + g'(t) xi.
inline Sample target_velocity(const PathSchedule& sched, const Sample& x0, const Sample& x1, const Sample& xi,
                              double t) {
  detail::check_triple(x0, x1, xi, "target_velocity");
  detail::check_time(t);
  return detail::combine3(sched.alpha_dot(t), x0, sched.beta_dot(t), x1, sched.g_dot(t), xi);
}

/// Squared error between predicted and target velocity, averaged over elements.
///
/// The reduction is a per-element mean, so the loss scale does not depend on the
/// resolution: predicted = [1, 1], target = [0, 0] gives 1 (the summed squared norm
/// would be 2 = size() * fm_loss).
inline double fm_loss(const Sample& predicted, const Sample& target) {
  require_same_shape(predicted, target, "fm_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predicted.size());
}

/// Arithmetic mean of fm_loss over a batch of (predicted, target) pairs.
inline double fm_loss(std::span<const Sample> predicted, std::span<const Sample> target) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw DimensionError("fm_loss: batch sizes differ or are empty");
  }
  double acc = 0.0;
  for (std::size_t b = 0; b < predicted.size(); ++b) acc += fm_loss(predicted[b], target[b]);
  return acc / static_cast<double>(predicted.size());
}

struct RectifiedPair {
  Sample x_t;
  Sample u_t;
};

/// Rectified interpolant and its regression target:
///   x_t = (1 - phi) x0 + phi x1 + sigma sqrt(phi (1 - phi)) eps,   u_t = phi'(t) (x1 - x0).
///
/// u_t is the velocity of the noise-free path; for sigma > 0 it is not the time
/// derivative of x_t itself.
inline RectifiedPair rectified_interpolate(const RectifiedSchedule& sched, const Sample& x0, const Sample& x1,
                                           const Sample& eps, double t) {
  detail::check_triple(x0, x1, eps, "rectified_interpolate");
  detail::check_time(t);
  const double p = sched.phi(t);
  const double dp = sched.phi_dot(t);
  const double noise = sched.noise_scale(t);
  std::vector<double> xt(x0.size()), ut(x0.size());
  for (std::size_t i = 0; i < xt.size(); ++i) {
    xt[i] = (1.0 - p) * x0[i] + p * x1[i] + noise * eps[i];
    ut[i] = dp * (x1[i] - x0[i]);
  }
  return {Sample(x0.shape(), std::move(xt)), Sample(x0.shape(), std::move(ut))};
}

/// Classifier-free guidance: v_uncond + omega (v_cond - v_uncond).
///
/// Evaluated as omega v_cond + (1 - omega) v_uncond, which is exact at omega = 1
/// (returns v_cond bit for bit) and at omega = 0.
inline double cfg_mix(double v_cond, double v_uncond, double omega) {
  return omega * v_cond + (1.0 - omega) * v_uncond;
}

inline Sample cfg_combine(const Sample& v_cond, const Sample& v_uncond, double omega) {
  require_same_shape(v_cond, v_uncond, "cfg_combine");
  std::vector<double> out(v_cond.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cfg_mix(v_cond[i], v_uncond[i], omega);
  return Sample(v_cond.shape(), std::move(out));
}

inline void check_drop_probability(double p_drop) {
  if (!(p_drop >= 0.0 && p_drop <= 1.0)) {
    throw DomainError("p_drop must lie in [0, 1], got " + std::to_string(p_drop));
  }
}

/// Replaces y by the null condition with probability p_drop. Consumes exactly one
/// uniform draw from rng regardless of the outcome.
inline Condition condition_dropout(const Condition& y, double p_drop, Rng& rng) {
  check_drop_probability(p_drop);
  const double u = uniform01(rng);
  return u < p_drop ? Condition::none() : y;
}

}  // namespace fmlab::fm
