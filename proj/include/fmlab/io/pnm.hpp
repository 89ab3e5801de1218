#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "fmlab/core/error.hpp"
#include "fmlab/core/sample.hpp"
#include "fmlab/mask/binary_mask.hpp"

// Binary netpbm rasters: P5 (grey) and P6 (RGB), maxval 255.

namespace fmlab::io {

struct Raster8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 (P5) or 3 (P6)
  std::vector<std::uint8_t> pixels;  // row-major, channels interleaved
};

namespace detail {

inline std::size_t read_header_int(const std::vector<unsigned char>& buf, std::size_t& pos, const std::string& path) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= buf.size() || !std::isdigit(buf[pos])) throw IoError(path + ": malformed PNM header");
  std::size_t v = 0;
  while (pos < buf.size() && std::isdigit(buf[pos])) v = v * 10 + static_cast<std::size_t>(buf[pos++] - '0');
  return v;
}

}  // namespace detail

inline Raster8 read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read raster " + path);
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6')) {
    throw IoError(path + ": only binary P5/P6 rasters are supported");
  }
  Raster8 r;
  r.channels = buf[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  r.width = detail::read_header_int(buf, pos, path);
  r.height = detail::read_header_int(buf, pos, path);
  const std::size_t maxval = detail::read_header_int(buf, pos, path);
  if (maxval != 255) throw IoError(path + ": maxval must be 255");
  if (r.width == 0 || r.height == 0) throw IoError(path + ": empty raster");
  ++pos;  // single whitespace before the data
  const std::size_t n = r.width * r.height * r.channels;
  if (buf.size() < pos + n) throw IoError(path + ": truncated pixel data");
  r.pixels.assign(buf.begin() + static_cast<long>(pos), buf.begin() + static_cast<long>(pos + n));
  return r;
}

inline void write_pnm(const std::string& path, const Raster8& r) {
  if (r.channels != 1 && r.channels != 3) throw IoError("PNM rasters have 1 or 3 channels");
  if (r.pixels.size() != r.width * r.height * r.channels) throw IoError("raster pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write raster " + path);
  out << (r.channels == 1 ? "P5" : "P6") << "\n" << r.width << " " << r.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (!out) throw IoError("failed writing " + path);
}

/// Grey rasters only; a pixel is foreground when its value is >= 128.
inline mask::BinaryMask read_mask(const std::string& path) {
  const Raster8 r = read_pnm(path);
  if (r.channels != 1) throw IoError(path + ": masks must be P5 grey rasters");
  mask::BinaryMask m(r.width, r.height);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) m.set(i % r.width, i / r.width, r.pixels[i] >= 128);
  return m;
}

inline void write_mask(const std::string& path, const mask::BinaryMask& m) {
  Raster8 r{m.width(), m.height(), 1, std::vector<std::uint8_t>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i) r.pixels[i] = m.bits()[i] ? 255 : 0;
  write_pnm(path, r);
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Image as an (H, W, C) sample with values in [0, 1].
inline Sample read_image(const std::string& path) {
  const Raster8 r = read_pnm(path);
  std::vector<double> v(r.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = r.pixels[i] / 255.0;
  return Sample(Shape::image(r.height, r.width, r.channels), std::move(v));
}

/// Values are clamped to [0, 1] and rounded to 8 bits.
inline void write_image(const std::string& path, const Sample& s) {
  if (s.shape().rank() != 3 || (s.shape()[2] != 1 && s.shape()[2] != 3)) {
    throw IoError("write_image needs an (H, W, 1) or (H, W, 3) sample, got " + s.shape().to_string());
  }
  Raster8 r{s.shape()[1], s.shape()[0], s.shape()[2], std::vector<std::uint8_t>(s.size())};
  for (std::size_t i = 0; i < s.size(); ++i) r.pixels[i] = to_byte(s[i]);
  write_pnm(path, r);
}

}  // namespace fmlab::io
