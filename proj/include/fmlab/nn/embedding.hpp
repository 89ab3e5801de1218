#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"

namespace fmlab::nn {

/// Time is multiplied by this factor before the sinusoidal embedding so that
/// nearby t in [0, 1] map to well separated phases.
inline constexpr double kTimeScale = 1000.0;

/// Sinusoidal embedding of s = 1000 t, interleaved as
/// (sin(s / 10000^(2i/dim)), cos(s / 10000^(2i/dim))) for i = 0 .. dim/2 - 1.
inline void time_embedding_into(double t, std::size_t dim, double* out) {
  const double s = kTimeScale * t;
  for (std::size_t i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    out[2 * i] = std::sin(s * freq);
    out[2 * i + 1] = std::cos(s * freq);
  }
}

inline std::vector<double> time_embedding(double t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw DomainError("time embedding dim must be even and positive, got " + std::to_string(dim));
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("time embedding needs t in [0, 1], got " + std::to_string(t));
  std::vector<double> out(dim);
  time_embedding_into(t, dim, out.data());
  return out;
}

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

/// d/dx [x sigmoid(x)] = sigmoid(x) (1 + x (1 - sigmoid(x))).
inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace fmlab::nn
