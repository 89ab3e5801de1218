#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/mask/binary_mask.hpp"

namespace fmlab::metrics {

/// Hard or soft pixel counts.
struct ConfusionCounts {
  double tp = 0.0, fp = 0.0, fn = 0.0, tn = 0.0;

  void validate() const {
    if (tp < 0.0 || fp < 0.0 || fn < 0.0 || tn < 0.0) throw DomainError("confusion counts must be >= 0");
  }
};

inline ConfusionCounts confusion(const mask::BinaryMask& pred, const mask::BinaryMask& gt) {
  mask::BinaryMask::require_same_dims(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.bits()[i], g = gt.bits()[i];
    if (p && g) c.tp += 1;
    else if (p) c.fp += 1;
    else if (g) c.fn += 1;
    else c.tn += 1;
  }
  return c;
}

/// TP / (TP + FP + FN); 1 when prediction and ground truth are both empty.
inline double iou(const ConfusionCounts& c) {
  c.validate();
  const double den = c.tp + c.fp + c.fn;
  return den == 0.0 ? 1.0 : c.tp / den;
}

/// 2TP / (2TP + FP + FN); 1 when prediction and ground truth are both empty.
inline double f1(const ConfusionCounts& c) {
  c.validate();
  const double den = 2.0 * c.tp + c.fp + c.fn;
  return den == 0.0 ? 1.0 : 2.0 * c.tp / den;
}

/// Row-major real raster (probabilities, logits, edge maps).
struct Field {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

inline void require_match(const Field& f, const mask::BinaryMask& gt, const char* what) {
  if (f.width != gt.width() || f.height != gt.height() || f.values.size() != gt.size()) {
    throw DimensionError(std::string(what) + ": raster and mask dims differ");
  }
}

}  // namespace fmlab::metrics
