#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fmlab/mask/binary_mask.hpp"

namespace fmlab::mask {

struct Components {
  std::size_t count = 0;
  /// Row-major labels: 0 = background, 1..count = component id in scan order.
  std::vector<int> labels;
};

/// 8-connected component labelling by breadth-first flood fill.
inline Components connected_components(const BinaryMask& m) {
  Components out;
  out.labels.assign(m.size(), 0);
  std::vector<std::pair<long, long>> queue;
  const long w = static_cast<long>(m.width());
  const long h = static_cast<long>(m.height());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      if (!m.at(x, y) || out.labels[y * w + x] != 0) continue;
      const int id = static_cast<int>(++out.count);
      queue.clear();
      queue.emplace_back(x, y);
      out.labels[y * w + x] = id;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto [cx, cy] = queue[head];
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            const long nx = cx + dx, ny = cy + dy;
            if (!m.at_padded(nx, ny) || out.labels[ny * w + nx] != 0) continue;
            out.labels[ny * w + nx] = id;
            queue.emplace_back(nx, ny);
          }
        }
      }
    }
  }
  return out;
}

inline std::size_t component_count(const BinaryMask& m) { return connected_components(m).count; }

}  // namespace fmlab::mask
