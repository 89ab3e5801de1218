#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"

namespace fmlab {

/// Interpolant coefficients x_t = alpha(t) x0 + beta(t) x1 + g(t) xi together with their
/// closed-form time derivatives.
///
/// Schedules are immutable and only built through the named factories, so a
/// coefficient and its derivative always come from the same formula. Every factory
/// satisfies alpha(0) = 1, beta(1) = 1, g(0) = g(1) = 0.
class PathSchedule {
 public:
  enum class Kind { linear, stochastic, rectified_mean, trigonometric };

  /// alpha = 1 - t, beta = t, g = 0.
  static PathSchedule linear() { return PathSchedule(Kind::linear, 0.0); }

  /// Linear path plus a bridge noise term g(t) = gain * t (1 - t).
  static PathSchedule stochastic(double gain = 1.0) {
    if (!std::isfinite(gain)) throw DomainError("stochastic schedule gain must be finite");
    return PathSchedule(Kind::stochastic, gain);
  }

  /// Noise-free path of the rectified schedule: alpha = 1 - t^2, beta = t^2.
  static PathSchedule rectified_mean() { return PathSchedule(Kind::rectified_mean, 0.0); }

  /// alpha = cos(pi t / 2), beta = sin(pi t / 2), g = 0.
  static PathSchedule trigonometric() { return PathSchedule(Kind::trigonometric, 0.0); }

  /// Every schedule this library ships; property tests iterate over this list.
  static std::vector<PathSchedule> registered() {
    return {linear(), stochastic(1.0), rectified_mean(), trigonometric()};
  }

  Kind kind() const { return kind_; }
  std::string name() const {
    switch (kind_) {
      case Kind::linear: return "linear";
      case Kind::stochastic: return "stochastic";
      case Kind::rectified_mean: return "rectified_mean";
      case Kind::trigonometric: return "trigonometric";
    }
    return "?";
  }

  double alpha(double t) const {
    switch (kind_) {
      case Kind::linear:
      case Kind::stochastic: return 1.0 - t;
      case Kind::rectified_mean: return 1.0 - t * t;
      case Kind::trigonometric: return std::cos(kHalfPi * t);
    }
    return 0.0;
  }
  double beta(double t) const {
    switch (kind_) {
      case Kind::linear:
      case Kind::stochastic: return t;
      case Kind::rectified_mean: return t * t;
      case Kind::trigonometric: return std::sin(kHalfPi * t);
    }
    return 0.0;
  }
  double g(double t) const { return kind_ == Kind::stochastic ? gain_ * t * (1.0 - t) : 0.0; }

  double alpha_dot(double t) const {
    switch (kind_) {
      case Kind::linear:
      case Kind::stochastic: return -1.0;
      case Kind::rectified_mean: return -2.0 * t;
      case Kind::trigonometric: return -kHalfPi * std::sin(kHalfPi * t);
    }
    return 0.0;
  }
  double beta_dot(double t) const {
    switch (kind_) {
      case Kind::linear:
      case Kind::stochastic: return 1.0;
      case Kind::rectified_mean: return 2.0 * t;
      case Kind::trigonometric: return kHalfPi * std::cos(kHalfPi * t);
    }
    return 0.0;
  }
  double g_dot(double t) const { return kind_ == Kind::stochastic ? gain_ * (1.0 - 2.0 * t) : 0.0; }

 private:
  static constexpr double kHalfPi = 1.57079632679489661923;

  PathSchedule(Kind kind, double gain) : kind_(kind), gain_(gain) {}

  Kind kind_;
  double gain_;
};

/// Rectifying schedule phi(t) = t^2 with noise amplitude sigma, used to transport a
/// background image to a crack image.
class RectifiedSchedule {
 public:
  static constexpr double kDefaultSigma = 0.1;

  explicit RectifiedSchedule(double sigma = kDefaultSigma) : sigma_(sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw DomainError("rectified schedule sigma must be finite and >= 0, got " + std::to_string(sigma));
    }
  }

  double phi(double t) const { return t * t; }
  double phi_dot(double t) const { return 2.0 * t; }
  double sigma() const { return sigma_; }

  /// sigma * sqrt(phi (1 - phi)); exactly zero at t = 0 and t = 1.
  double noise_scale(double t) const {
    const double p = phi(t);
    return sigma_ * std::sqrt(p * (1.0 - p));
  }

 private:
  double sigma_;
};

}  // namespace fmlab
