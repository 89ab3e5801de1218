#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"

namespace fmlab {

/// Dimension descriptor of a sample: (D,) for point clouds or (H, W, C) for rasters.
class Shape {
 public:
  Shape() = default;
  static Shape vector(std::size_t d) { return Shape({d}); }
  static Shape image(std::size_t h, std::size_t w, std::size_t c) { return Shape({h, w, c}); }

  std::size_t size() const {
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  bool operator==(const Shape&) const = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(dims_[i]);
    }
    return s + ")";
  }

 private:
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    for (auto d : dims_) {
      if (d == 0) throw DimensionError("shape dimensions must be positive");
    }
  }

  std::vector<std::size_t> dims_;
};

/// A flat real vector with its shape. Values are unitless pixels or coordinates.
class Sample {
 public:
  Sample() = default;
  Sample(Shape shape, std::vector<double> values) : shape_(std::move(shape)), x_(std::move(values)) {
    if (x_.size() != shape_.size()) {
      throw DimensionError("sample has " + std::to_string(x_.size()) + " values but shape " +
                           shape_.to_string() + " needs " + std::to_string(shape_.size()));
    }
    for (double v : x_) {
      if (!std::isfinite(v)) throw NumericError("sample entries must be finite");
    }
  }
  /// Convenience for 1-D samples.
  explicit Sample(std::vector<double> values) : Sample(from_vector(std::move(values))) {}

  static Sample zeros(const Shape& shape) { return Sample(shape, std::vector<double>(shape.size(), 0.0)); }
  static Sample filled(const Shape& shape, double v) {
    return Sample(shape, std::vector<double>(shape.size(), v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return x_.size(); }
  std::span<const double> values() const { return x_; }
  const std::vector<double>& data() const { return x_; }
  double operator[](std::size_t i) const { return x_[i]; }

 private:
  static Sample from_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Sample(Shape::vector(n), std::move(values));
  }

  Shape shape_;
  std::vector<double> x_;
};

inline void require_same_shape(const Sample& a, const Sample& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape().to_string() + " vs " +
                         b.shape().to_string());
  }
}

}  // namespace fmlab
