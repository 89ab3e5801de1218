#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/mask/binary_mask.hpp"

namespace fmlab::mask {

/// rho(M) = (1 / HW) sum M_ij.
inline double coverage(const BinaryMask& m) {
  return static_cast<double>(m.count()) / static_cast<double>(m.size());
}

/// Maps a coverage ratio to one of C sparsity classes through C + 1 strictly
/// increasing edges. Intervals are lower-closed, [e_i, e_{i+1}); anything at or
/// above the last edge lands in class C - 1.
class CoverageBinning {
 public:
  explicit CoverageBinning(std::vector<double> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw ConfigError("coverage binning needs at least two edges");
    if (edges_.front() < 0.0 || edges_.back() > 1.0) throw ConfigError("coverage edges must lie in [0, 1]");
    for (std::size_t i = 1; i < edges_.size(); ++i) {
      if (!(edges_[i] > edges_[i - 1])) throw ConfigError("coverage edges must be strictly increasing");
    }
  }

  /// C equal-width bins starting at 0: [0, w), [w, 2w), ...
  static CoverageBinning uniform(int classes, double bin_width) {
    if (classes < 1 || !(bin_width > 0.0) || classes * bin_width > 1.0 + 1e-12) {
      throw ConfigError("uniform binning needs classes >= 1 and classes * width <= 1");
    }
    std::vector<double> e(static_cast<std::size_t>(classes) + 1);
    for (int i = 0; i <= classes; ++i) e[static_cast<std::size_t>(i)] = std::min(1.0, i * bin_width);
    return CoverageBinning(std::move(e));
  }

  /// Ten 0.5% bins covering 0-5% coverage.
  static CoverageBinning standard() { return uniform(10, 0.005); }

  int classes() const { return static_cast<int>(edges_.size()) - 1; }
  const std::vector<double>& edges() const { return edges_; }

  int assign(double rho) const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("coverage must lie in [0, 1], got " + std::to_string(rho));
    // First edge strictly greater than rho; class is the interval just below it.
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), rho);
    const long idx = static_cast<long>(it - edges_.begin()) - 1;
    return static_cast<int>(std::clamp(idx, 0L, static_cast<long>(classes() - 1)));
  }

 private:
  std::vector<double> edges_;
};

inline int assign_class(double rho, const CoverageBinning& b) { return b.assign(rho); }

}  // namespace fmlab::mask
