#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"

namespace fmlab::cond {

/// C x H x W real tensor, channel-major.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : c_(channels), h_(height), w_(width), data_(channels * height * width, fill) {
    if (!channels || !height || !width) throw DimensionError("feature map dims must be >= 1");
  }
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data)
      : c_(channels), h_(height), w_(width), data_(std::move(data)) {
    if (!channels || !height || !width) throw DimensionError("feature map dims must be >= 1");
    if (data_.size() != c_ * h_ * w_) throw DimensionError("feature map data size mismatch");
  }

  std::size_t channels() const { return c_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t pixels() const { return h_ * w_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * h_ + y) * w_ + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return data_[(c * h_ + y) * w_ + x]; }
  /// Zero outside the spatial extent.
  double at_padded(std::size_t c, long y, long x) const {
    if (y < 0 || x < 0 || y >= static_cast<long>(h_) || x >= static_cast<long>(w_)) return 0.0;
    return at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_dims(const FeatureMap& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

 private:
  std::size_t c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

/// Single-channel H x W raster such as the boundary map G.
struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// 3x3 convolution, zero padding, stride 1. Weights laid out [out][in][ky][kx].
struct Conv3x3 {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Conv3x3() = default;
  Conv3x3(std::size_t in_channels, std::size_t out_channels)
      : in(in_channels), out(out_channels), weight(in_channels * out_channels * 9, 0.0), bias(out_channels, 0.0) {}

  double& w(std::size_t o, std::size_t i, int ky, int kx) { return weight[((o * in + i) * 3 + ky) * 3 + kx]; }
  double w(std::size_t o, std::size_t i, int ky, int kx) const { return weight[((o * in + i) * 3 + ky) * 3 + kx]; }

  FeatureMap operator()(const FeatureMap& x) const {
    if (x.channels() != in) {
      throw DimensionError("conv3x3 expects " + std::to_string(in) + " channels, got " + std::to_string(x.channels()));
    }
    FeatureMap y(out, x.height(), x.width());
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t r = 0; r < x.height(); ++r) {
        for (std::size_t c = 0; c < x.width(); ++c) {
          double acc = bias[o];
          for (std::size_t i = 0; i < in; ++i)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx)
                acc += w(o, i, ky, kx) * x.at_padded(i, static_cast<long>(r) + ky - 1, static_cast<long>(c) + kx - 1);
          y.at(o, r, c) = acc;
        }
      }
    }
    return y;
  }
};

inline FeatureMap relu(FeatureMap x) {
  for (auto& v : x.data()) v = v > 0.0 ? v : 0.0;
  return x;
}

}  // namespace fmlab::cond
