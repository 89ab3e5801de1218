#pragma once

#include <array>
#include <vector>

#include "fmlab/mask/binary_mask.hpp"

namespace fmlab::mask {

/// Zhang-Suen thinning to a one-pixel-wide skeleton. Outside the raster is background.
inline BinaryMask zhang_suen_thin(BinaryMask m) {
  const long w = static_cast<long>(m.width());
  const long h = static_cast<long>(m.height());
  std::vector<std::pair<long, long>> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
          if (!m.at(x, y)) continue;
          // P2..P9 clockwise starting north.
          const std::array<int, 8> p = {m.at_padded(x, y - 1),     m.at_padded(x + 1, y - 1),
                                        m.at_padded(x + 1, y),     m.at_padded(x + 1, y + 1),
                                        m.at_padded(x, y + 1),     m.at_padded(x - 1, y + 1),
                                        m.at_padded(x - 1, y),     m.at_padded(x - 1, y - 1)};
          int neighbours = 0, transitions = 0;
          for (int i = 0; i < 8; ++i) {
            neighbours += p[i];
            transitions += (p[i] == 0 && p[(i + 1) % 8] == 1);
          }
          if (neighbours < 2 || neighbours > 6 || transitions != 1) continue;
          const bool cond = pass == 0 ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                      : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
          if (cond) to_clear.emplace_back(x, y);
        }
      }
      for (auto [x, y] : to_clear) m.set(x, y, false);
      changed = changed || !to_clear.empty();
    }
  }
  return m;
}

}  // namespace fmlab::mask
