#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "fmlab/cond/feature_map.hpp"
#include "fmlab/core/error.hpp"

namespace fmlab::cond {

/// Four 1x1 projections (C x C) and the similarity temperature of the
/// cosine-normalised self-attention block.
struct AttentionParams {
  Eigen::MatrixXd w_f, w_g, w_h, w_v;
  double temperature = 1.0;
  double eps = 1e-8;

  explicit AttentionParams(std::size_t channels = 1)
      : w_f(Eigen::MatrixXd::Identity(channels, channels)),
        w_g(Eigen::MatrixXd::Identity(channels, channels)),
        w_h(Eigen::MatrixXd::Identity(channels, channels)),
        w_v(Eigen::MatrixXd::Zero(channels, channels)) {}
};

namespace detail {

inline Eigen::MatrixXd as_matrix(const FeatureMap& x) {
  // Channel-major storage is a row-major C x N matrix.
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      x.data().data(), static_cast<Eigen::Index>(x.channels()), static_cast<Eigen::Index>(x.pixels()));
}

inline void check(const FeatureMap& x, const AttentionParams& p) {
  const auto c = static_cast<Eigen::Index>(x.channels());
  for (const auto* w : {&p.w_f, &p.w_g, &p.w_h, &p.w_v}) {
    if (w->rows() != c || w->cols() != c) throw DimensionError("attention: projections must be C x C");
  }
  if (!std::isfinite(p.temperature)) throw DomainError("attention: temperature must be finite");
}

}  // namespace detail

/// Cosine similarity M(u, v) = f(x_u)^T g(x_v) / (|f(x_u)| |g(x_v)| + eps), N x N.
inline Eigen::MatrixXd attention_similarity(const FeatureMap& x, const AttentionParams& p) {
  detail::check(x, p);
  const Eigen::MatrixXd xm = detail::as_matrix(x);
  const Eigen::MatrixXd f = p.w_f * xm;
  const Eigen::MatrixXd g = p.w_g * xm;
  const Eigen::VectorXd fn = f.colwise().norm().transpose();
  const Eigen::VectorXd gn = g.colwise().norm().transpose();
  Eigen::MatrixXd m = f.transpose() * g;
  for (Eigen::Index u = 0; u < m.rows(); ++u)
    for (Eigen::Index v = 0; v < m.cols(); ++v) m(u, v) /= fn(u) * gn(v) + p.eps;
  return m;
}

/// Row-stochastic attention A(u, .) = softmax(temperature * M(u, .)).
inline Eigen::MatrixXd attention_weights(const FeatureMap& x, const AttentionParams& p) {
  Eigen::MatrixXd a = p.temperature * attention_similarity(x, p);
  for (Eigen::Index u = 0; u < a.rows(); ++u) {
    const double mx = a.row(u).maxCoeff();
    a.row(u) = (a.row(u).array() - mx).exp();
    a.row(u) /= a.row(u).sum();
  }
  return a;
}

/// y_u = x_u + W_v sum_v A(u, v) h(x_v), with h = W_h x.
inline FeatureMap attention_forward(const FeatureMap& x, const AttentionParams& p) {
  const Eigen::MatrixXd a = attention_weights(x, p);
  const Eigen::MatrixXd xm = detail::as_matrix(x);
  const Eigen::MatrixXd h = p.w_h * xm;                    // C x N
  const Eigen::MatrixXd y = xm + p.w_v * (h * a.transpose());  // column u = sum_v A(u,v) h_v
  FeatureMap out(x.channels(), x.height(), x.width());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      out.data().data(), y.rows(), y.cols()) = y;
  return out;
}

}  // namespace fmlab::cond
