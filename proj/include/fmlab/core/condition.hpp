#pragma once

#include <string>
#include <vector>

#include "fmlab/core/error.hpp"

namespace fmlab {

/// Conditioning value y fed to a velocity model.
///
/// Three forms: a class label (sparsity class of the mask generator), a dense
/// conditioning map (the per-pixel one-hot mask of the renderers), or the null
/// condition used by classifier-free guidance. For map conditioning the null
/// condition is the all-zeros map; for class conditioning it is the reserved
/// embedding row one past the last class.
class Condition {
 public:
  static Condition none() { return Condition(); }
  static Condition label(int y) {
    if (y < 0) throw DomainError("class label must be non-negative, got " + std::to_string(y));
    Condition c;
    c.kind_ = Kind::label;
    c.label_ = y;
    return c;
  }
  static Condition map(std::vector<double> features) {
    Condition c;
    c.kind_ = Kind::map;
    c.map_ = std::move(features);
    return c;
  }

  bool is_null() const { return kind_ == Kind::none; }
  bool is_label() const { return kind_ == Kind::label; }
  bool is_map() const { return kind_ == Kind::map; }

  int label() const {
    if (!is_label()) throw DomainError("condition is not a class label");
    return label_;
  }
  const std::vector<double>& map() const {
    if (!is_map()) throw DomainError("condition is not a conditioning map");
    return map_;
  }

  bool operator==(const Condition&) const = default;

 private:
  enum class Kind { none, label, map };
  Kind kind_ = Kind::none;
  int label_ = 0;
  std::vector<double> map_;
};

}  // namespace fmlab
