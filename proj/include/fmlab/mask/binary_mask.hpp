#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"

namespace fmlab::mask {

/// H x W raster of {0, 1}, row-major. Cracks are foreground (1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height) : w_(width), h_(height), bits_(width * height, 0) {
    if (width == 0 || height == 0) throw DimensionError("mask dimensions must be positive");
  }
  BinaryMask(std::size_t width, std::size_t height, std::vector<std::uint8_t> bits)
      : w_(width), h_(height), bits_(std::move(bits)) {
    if (width == 0 || height == 0) throw DimensionError("mask dimensions must be positive");
    if (bits_.size() != width * height) {
      throw DimensionError("mask needs " + std::to_string(width * height) + " bits, got " +
                           std::to_string(bits_.size()));
    }
    for (auto b : bits_) {
      if (b > 1) throw DomainError("mask values must be 0 or 1");
    }
  }

  static BinaryMask filled(std::size_t width, std::size_t height, bool value) {
    BinaryMask m(width, height);
    std::fill(m.bits_.begin(), m.bits_.end(), value ? 1 : 0);
    return m;
  }

  /// Builds a mask from a "01" string per row; handy in tests.
  static BinaryMask from_rows(const std::vector<std::string>& rows) {
    if (rows.empty()) throw DimensionError("mask needs at least one row");
    BinaryMask m(rows.front().size(), rows.size());
    for (std::size_t y = 0; y < rows.size(); ++y) {
      if (rows[y].size() != m.w_) throw DimensionError("ragged mask rows");
      for (std::size_t x = 0; x < m.w_; ++x) m.set(x, y, rows[y][x] == '1');
    }
    return m;
  }

  std::size_t width() const { return w_; }
  std::size_t height() const { return h_; }
  std::size_t size() const { return bits_.size(); }

  bool at(std::size_t x, std::size_t y) const { return bits_[y * w_ + x] != 0; }
  /// Zero outside the raster.
  bool at_padded(long x, long y) const {
    if (x < 0 || y < 0 || x >= static_cast<long>(w_) || y >= static_cast<long>(h_)) return false;
    return at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  }
  void set(std::size_t x, std::size_t y, bool v) { bits_[y * w_ + x] = v ? 1 : 0; }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }
  bool empty() const { return count() == 0; }

  BinaryMask complement() const {
    BinaryMask out = *this;
    for (auto& b : out.bits_) b ^= 1;
    return out;
  }
  BinaryMask transposed() const {
    BinaryMask out(h_, w_);
    for (std::size_t y = 0; y < h_; ++y)
      for (std::size_t x = 0; x < w_; ++x) out.set(y, x, at(x, y));
    return out;
  }
  /// True when every foreground pixel of this mask is also set in `other`.
  bool subset_of(const BinaryMask& other) const {
    require_same_dims(*this, other, "subset_of");
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] && !other.bits_[i]) return false;
    return true;
  }

  std::string to_string() const {
    std::string s;
    for (std::size_t y = 0; y < h_; ++y) {
      for (std::size_t x = 0; x < w_; ++x) s += at(x, y) ? '1' : '0';
      s += '\n';
    }
    return s;
  }

  bool operator==(const BinaryMask&) const = default;

  static void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (a.w_ != b.w_ || a.h_ != b.h_) {
      throw DimensionError(std::string(what) + ": mask dims " + std::to_string(a.w_) + "x" +
                           std::to_string(a.h_) + " vs " + std::to_string(b.w_) + "x" + std::to_string(b.h_));
    }
  }

 private:
  std::size_t w_ = 0;
  std::size_t h_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Two-channel one-hot encoding, channel-major: [foreground plane, background plane].
inline std::vector<double> one_hot(const BinaryMask& m) {
  const std::size_t n = m.size();
  std::vector<double> out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = m.bits()[i] ? 1.0 : 0.0;
    out[n + i] = m.bits()[i] ? 0.0 : 1.0;
  }
  return out;
}

/// Nearest-neighbour resize; keeps the raster binary.
inline BinaryMask resize_nearest(const BinaryMask& m, std::size_t width, std::size_t height) {
  BinaryMask out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(m.height() - 1, (y * m.height()) / height);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(m.width() - 1, (x * m.width()) / width);
      out.set(x, y, m.at(sx, sy));
    }
  }
  return out;
}

/// Thresholds a real raster (row-major, width*height values): v >= threshold -> 1.
inline BinaryMask binarize(const std::vector<double>& values, std::size_t width, std::size_t height,
                           double threshold) {
  if (values.size() != width * height) throw DimensionError("binarize: raster size mismatch");
  BinaryMask out(width, height);
  for (std::size_t i = 0; i < values.size(); ++i) out.set(i % width, i / width, values[i] >= threshold);
  return out;
}

}  // namespace fmlab::mask
