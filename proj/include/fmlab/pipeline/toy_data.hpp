#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "fmlab/core/condition.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/core/sample.hpp"
#include "fmlab/mask/binary_mask.hpp"
#include "fmlab/mask/coverage.hpp"
#include "fmlab/mask/morphology.hpp"
#include "fmlab/nn/trainer.hpp"

// Small synthetic tasks that exercise every model type in seconds.

namespace fmlab::toy {

/// Class y in {0, 1} is N(mu_y, sd^2 I) in 2-D with mu_0 = (-center, -center) and
/// mu_1 = (+center, +center). Classes alternate.
inline std::vector<nn::TrainingPair> two_gaussians(std::size_t count, std::uint64_t seed, double center = 2.0,
                                                   double sd = 0.1) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  std::vector<nn::TrainingPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int y = static_cast<int>(i % 2);
    const double m = y ? center : -center;
    const double a = m + noise(rng);
    const double b = m + noise(rng);
    out.push_back({Sample({a, b}), Condition::label(y)});
  }
  return out;
}

/// Flat grey level in [0.55, 0.85] plus independent per-pixel texture in [-0.05, 0.05].
inline Sample textured_background(std::size_t height, std::size_t width, Rng& rng) {
  const double level = 0.55 + 0.3 * uniform01(rng);
  std::vector<double> v(height * width);
  for (auto& p : v) p = level + 0.1 * (uniform01(rng) - 0.5);
  return Sample(Shape::image(height, width, 1), std::move(v));
}

/// One straight line (horizontal, vertical or either diagonal) of length between
/// half the side and the full side.
inline mask::BinaryMask random_line_mask(std::size_t width, std::size_t height, Rng& rng) {
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(lo, hi)(rng));
  };
  mask::BinaryMask m(width, height);
  const std::size_t side = std::min(width, height);
  const std::size_t len = pick((side + 1) / 2, side);
  const int kind = static_cast<int>(pick(0, 3));
  const std::size_t x0 = pick(0, width - (kind == 1 ? 1 : len));
  const std::size_t y0 = pick(0, height - (kind == 0 ? 1 : len));
  for (std::size_t i = 0; i < len; ++i) {
    switch (kind) {
      case 0: m.set(x0 + i, y0, true); break;
      case 1: m.set(x0, y0 + i, true); break;
      case 2: m.set(x0 + i, y0 + i, true); break;
      default: m.set(x0 + len - 1 - i, y0 + i, true); break;
    }
  }
  return m;
}

/// The background with every mask pixel set to 0.
inline Sample darken(const Sample& background, const mask::BinaryMask& m) {
  std::vector<double> v = background.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.bits()[i]) v[i] = 0.0;
  }
  return Sample(background.shape(), std::move(v));
}

struct DarkLineTask {
  std::vector<nn::InjectionPair> pairs;
  std::vector<Sample> backgrounds;
};

/// Crack images are backgrounds with a dark line; the injector backgrounds are an
/// independent draw from the same distribution.
inline DarkLineTask dark_line_task(std::size_t side, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  DarkLineTask task;
  for (std::size_t i = 0; i < count; ++i) {
    const Sample bg = textured_background(side, side, rng);
    auto m = random_line_mask(side, side, rng);
    task.pairs.push_back({darken(bg, m), std::move(m)});
  }
  for (std::size_t i = 0; i < count; ++i) task.backgrounds.push_back(textured_background(side, side, rng));
  return task;
}

/// A crack-like 8-connected random walk of `length` steps, optionally thickened.
inline mask::BinaryMask random_crack(std::size_t width, std::size_t height, std::size_t length, bool thick, Rng& rng) {
  mask::BinaryMask m(width, height);
  long x = static_cast<long>(std::uniform_int_distribution<std::size_t>(0, width - 1)(rng));
  long y = static_cast<long>(std::uniform_int_distribution<std::size_t>(0, height - 1)(rng));
  int dx = static_cast<int>(std::uniform_int_distribution<int>(0, 1)(rng)) * 2 - 1;
  int dy = static_cast<int>(std::uniform_int_distribution<int>(-1, 1)(rng));
  for (std::size_t i = 0; i < length; ++i) {
    m.set(static_cast<std::size_t>(x), static_cast<std::size_t>(y), true);
    if (uniform01(rng) < 0.3) dy = std::clamp(dy + std::uniform_int_distribution<int>(-1, 1)(rng), -1, 1);
    long nx = x + dx, ny = y + dy;
    if (nx < 0 || nx >= static_cast<long>(width)) {
      dx = -dx;
      nx = x + dx;
    }
    if (ny < 0 || ny >= static_cast<long>(height)) {
      dy = -dy;
      ny = std::clamp(y + dy, 0L, static_cast<long>(height) - 1);
    }
    x = nx;
    y = ny;
  }
  if (thick) m = mask::dilate(m, mask::StructuringElement::cross());
  return m;
}

/// Coverage bins for toy rasters: four classes of width 5%.
inline mask::CoverageBinning toy_bins() { return mask::CoverageBinning::uniform(4, 0.05); }

/// Random cracks whose lengths spread the coverage over all toy classes.
inline std::vector<mask::BinaryMask> crack_masks(std::size_t side, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<mask::BinaryMask> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t length = std::uniform_int_distribution<std::size_t>(side / 2, 3 * side)(rng);
    out.push_back(random_crack(side, side, length, uniform01(rng) < 0.4, rng));
  }
  return out;
}

/// Renders a grey textured image with dark crack pixels, as the paired image of a mask.
inline Sample render_crack_image(const mask::BinaryMask& m, Rng& rng) {
  Sample bg = textured_background(m.height(), m.width(), rng);
  std::vector<double> v = bg.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.bits()[i]) v[i] = 0.1 + 0.1 * uniform01(rng);
  }
  return Sample(bg.shape(), std::move(v));
}

/// Mask raster as a sample with values in {0, 1}.
inline Sample mask_sample(const mask::BinaryMask& m) {
  std::vector<double> v(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) v[i] = m.bits()[i] ? 1.0 : 0.0;
  return Sample(Shape::image(m.height(), m.width(), 1), std::move(v));
}

}  // namespace fmlab::toy
