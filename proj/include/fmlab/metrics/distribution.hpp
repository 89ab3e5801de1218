#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fmlab/core/error.hpp"

namespace fmlab::metrics {

/// n x dim feature matrix, one sample per row.
class FeatureSet {
 public:
  FeatureSet() = default;
  explicit FeatureSet(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
    if (!rows_.allFinite()) throw NumericError("feature set entries must be finite");
  }
  static FeatureSet from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return FeatureSet(Eigen::MatrixXd(0, 0));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) throw DimensionError("feature rows have different lengths");
      for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return FeatureSet(std::move(m));
  }

  std::size_t n() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  const Eigen::MatrixXd& rows() const { return rows_; }

  Eigen::VectorXd mean() const { return rows_.colwise().mean().transpose(); }
  /// Unbiased (n - 1) sample covariance.
  Eigen::MatrixXd covariance() const {
    const Eigen::MatrixXd centered = rows_.rowwise() - rows_.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(rows_.rows() - 1);
  }

 private:
  Eigen::MatrixXd rows_;
};

struct SqrtResult {
  Eigen::MatrixXd root;
  double min_eigenvalue = 0.0;
};

/// Principal square root of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues down to -tol * max|lambda| are treated as round-off and clamped to 0;
/// anything more negative raises NumericError naming the eigenvalue.
inline SqrtResult sqrtm_psd(const Eigen::MatrixXd& a, double tol = 1e-8) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw NumericError("sqrtm: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  const double lo = lam.minCoeff();
  if (lo < -tol * scale) {
    throw NumericError("sqrtm: matrix is not PSD, eigenvalue " + std::to_string(lo));
  }
  lam = lam.cwiseMax(0.0).cwiseSqrt();
  return {es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose(), lo};
}

struct FidTerms {
  double mean_term = 0.0;   ///< |mu_r - mu_s|^2
  double trace_term = 0.0;  ///< Tr(S_r + S_s - 2 (S_r^1/2 S_s S_r^1/2)^1/2)
  double value() const { return mean_term + trace_term; }
  /// The cross-term product P and its computed square root S, kept for checks.
  Eigen::MatrixXd product;
  Eigen::MatrixXd product_root;
};

inline FidTerms fid_terms(const FeatureSet& real, const FeatureSet& syn) {
  if (real.dim() != syn.dim()) throw DimensionError("fid: feature dims differ");
  if (real.n() < 2 || syn.n() < 2) throw DimensionError("fid: each feature set needs at least 2 rows");
  const Eigen::MatrixXd sr = real.covariance();
  const Eigen::MatrixXd ss = syn.covariance();
  const Eigen::MatrixXd sr_half = sqrtm_psd(sr).root;
  FidTerms t;
  t.product = sr_half * ss * sr_half;
  t.product_root = sqrtm_psd(t.product).root;
  t.mean_term = (real.mean() - syn.mean()).squaredNorm();
  t.trace_term = sr.trace() + ss.trace() - 2.0 * t.product_root.trace();
  return t;
}

/// Frechet distance between Gaussian fits of two feature sets.
inline double fid(const FeatureSet& real, const FeatureSet& syn) { return fid_terms(real, syn).value(); }

/// Cubic polynomial kernel k(a, b) = (a.b / dim + 1)^3.
inline Eigen::MatrixXd polynomial_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double inv_dim = 1.0 / static_cast<double>(a.cols());
  return ((a * b.transpose()).array() * inv_dim + 1.0).cube().matrix();
}

/// Unbiased MMD^2 under the cubic polynomial kernel.
///
/// Within-set sums exclude the diagonal. When the two sets have equal size the
/// cross term also drops its paired diagonal k(a_i, b_i), which is the U-statistic
/// form; it stays unbiased because a_i and b_i are independent, and it makes
/// kid(X, X) exactly zero. Unequal sizes use the full cross mean.
inline double kid(const FeatureSet& real, const FeatureSet& syn) {
  if (real.dim() != syn.dim()) throw DimensionError("kid: feature dims differ");
  if (real.n() < 2 || syn.n() < 2) throw DimensionError("kid: each feature set needs at least 2 rows");
  const double m = static_cast<double>(real.n());
  const double n = static_cast<double>(syn.n());
  const Eigen::MatrixXd kxx = polynomial_kernel(real.rows(), real.rows());
  const Eigen::MatrixXd kyy = polynomial_kernel(syn.rows(), syn.rows());
  const Eigen::MatrixXd kxy = polynomial_kernel(real.rows(), syn.rows());
  const double xx = (kxx.sum() - kxx.trace()) / (m * (m - 1.0));
  const double yy = (kyy.sum() - kyy.trace()) / (n * (n - 1.0));
  const double xy = real.n() == syn.n() ? (kxy.sum() - kxy.trace()) / (m * (m - 1.0)) : kxy.sum() / (m * n);
  return xx + yy - 2.0 * xy;
}

}  // namespace fmlab::metrics
