#pragma once

#include <cstddef>
#include <vector>

#include "fmlab/mask/binary_mask.hpp"

namespace fmlab::mask {

struct Offset {
  int dx = 0;
  int dy = 0;
  bool operator==(const Offset&) const = default;
};

/// Set of pixel offsets. The default element is the full 3x3 square (8-connected).
class StructuringElement {
 public:
  explicit StructuringElement(std::vector<Offset> offsets) : offsets_(std::move(offsets)) {}

  static StructuringElement square(int radius = 1) {
    std::vector<Offset> o;
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) o.push_back({dx, dy});
    return StructuringElement(std::move(o));
  }
  static StructuringElement cross() { return StructuringElement({{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}}); }

  StructuringElement reflected() const {
    std::vector<Offset> o;
    o.reserve(offsets_.size());
    for (auto [dx, dy] : offsets_) o.push_back({-dx, -dy});
    return StructuringElement(std::move(o));
  }

  const std::vector<Offset>& offsets() const { return offsets_; }

 private:
  std::vector<Offset> offsets_;
};

/// Minkowski sum under zero padding: out(p) = OR over o in se of m(p - o).
inline BinaryMask dilate(const BinaryMask& m, const StructuringElement& se = StructuringElement::square()) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      for (auto [dx, dy] : se.offsets()) {
        if (m.at_padded(static_cast<long>(x) - dx, static_cast<long>(y) - dy)) {
          out.set(x, y, true);
          break;
        }
      }
    }
  }
  return out;
}

/// Minkowski difference under zero padding: out(p) = AND over o in se of m(p + o).
/// Pixels whose neighbourhood leaves the raster see background and erode away.
inline BinaryMask erode(const BinaryMask& m, const StructuringElement& se = StructuringElement::square()) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      bool all = true;
      for (auto [dx, dy] : se.offsets()) {
        if (!m.at_padded(static_cast<long>(x) + dx, static_cast<long>(y) + dy)) {
          all = false;
          break;
        }
      }
      out.set(x, y, all);
    }
  }
  return out;
}

inline BinaryMask dilate_n(BinaryMask m, int times, const StructuringElement& se = StructuringElement::square()) {
  for (int i = 0; i < times; ++i) m = dilate(m, se);
  return m;
}

inline BinaryMask erode_n(BinaryMask m, int times, const StructuringElement& se = StructuringElement::square()) {
  for (int i = 0; i < times; ++i) m = erode(m, se);
  return m;
}

/// a AND NOT b.
inline BinaryMask difference(const BinaryMask& a, const BinaryMask& b) {
  BinaryMask::require_same_dims(a, b, "difference");
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i % a.width(), i / a.width(), a.bits()[i] && !b.bits()[i]);
  return out;
}

/// Integer shift by (dx, dy); pixels leaving the raster are dropped.
inline BinaryMask translate(const BinaryMask& m, int dx, int dy) {
  BinaryMask out(m.width(), m.height());
  for (std::size_t y = 0; y < m.height(); ++y)
    for (std::size_t x = 0; x < m.width(); ++x)
      out.set(x, y, m.at_padded(static_cast<long>(x) - dx, static_cast<long>(y) - dy));
  return out;
}

struct Window {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0, x1) x [y0, y1)
  bool contains(std::size_t x, std::size_t y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Replaces the pixels of `m` inside `win` by those of `edited`.
inline BinaryMask splice(const BinaryMask& m, const BinaryMask& edited, const Window& win) {
  BinaryMask out = m;
  for (std::size_t y = win.y0; y < win.y1 && y < m.height(); ++y)
    for (std::size_t x = win.x0; x < win.x1 && x < m.width(); ++x) out.set(x, y, edited.at(x, y));
  return out;
}

}  // namespace fmlab::mask
