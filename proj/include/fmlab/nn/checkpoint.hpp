#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fmlab/core/error.hpp"
#include "fmlab/io/config.hpp"
#include "fmlab/nn/velocity_model.hpp"

// Binary layout, all little-endian:
//   "FMCK" | u32 version | u64 n | n x f64 params | n x f64 ema params
// The architecture lives next to it in `<path>.cfg` as key = value text.

namespace fmlab::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  Eigen::VectorXd params;
  Eigen::VectorXd ema_params;
  /// Free-form metadata stored in the sidecar (coverage bins, class histogram, ...).
  std::map<std::string, std::string> extra;

  VelocityModel model(bool use_ema) const { return VelocityModel(config, use_ema ? ema_params : params); }
};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& buf, T v) {
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    static_assert(sizeof(T) == 8);
    bits = std::bit_cast<std::uint64_t>(v);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <class T>
T get_le(const std::vector<unsigned char>& buf, std::size_t& pos, const std::string& path) {
  if (pos + sizeof(T) > buf.size()) throw IoError("checkpoint " + path + " is truncated");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
  pos += sizeof(T);
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<double>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

inline std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.rank(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

inline Shape parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  for (const auto& part : io::split(text, 'x')) dims.push_back(static_cast<std::size_t>(std::stoull(part)));
  if (dims.size() == 1) return Shape::vector(dims[0]);
  if (dims.size() == 3) return Shape::image(dims[0], dims[1], dims[2]);
  throw IoError("unsupported data shape '" + text + "'");
}

}  // namespace detail

inline io::KeyValueConfig model_config_entries(const ModelConfig& c) {
  io::KeyValueConfig kv;
  kv.set("model.mode", to_string(c.mode));
  kv.set("model.data_shape", detail::shape_text(c.data_shape));
  kv.set("model.num_classes", c.num_classes);
  kv.set("model.cond_dim", static_cast<std::uint64_t>(c.cond_dim));
  kv.set("model.time_dim", static_cast<std::uint64_t>(c.time_dim));
  kv.set("model.hidden", static_cast<std::uint64_t>(c.hidden));
  kv.set("model.hidden_layers", c.hidden_layers);
  kv.set("model.gated_skip", std::string(c.gated_skip ? "true" : "false"));
  return kv;
}

inline ModelConfig model_config_from(const io::KeyValueConfig& kv) {
  ModelConfig c;
  const std::string mode = kv.get("model.mode");
  if (mode == "class") c.mode = ConditioningMode::class_conditional;
  else if (mode == "mask") c.mode = ConditioningMode::mask_conditional;
  else throw ConfigError("unknown model.mode '" + mode + "'");
  c.data_shape = detail::parse_shape(kv.get("model.data_shape"));
  c.num_classes = static_cast<int>(kv.get_int("model.num_classes"));
  c.cond_dim = kv.get_u64("model.cond_dim");
  c.time_dim = kv.get_u64("model.time_dim");
  c.hidden = kv.get_u64("model.hidden");
  c.hidden_layers = static_cast<int>(kv.get_int("model.hidden_layers"));
  c.gated_skip = kv.get_bool("model.gated_skip", false);
  c.validate();
  return c;
}

inline std::vector<unsigned char> encode_checkpoint(const Eigen::VectorXd& params, const Eigen::VectorXd& ema) {
  if (params.size() != ema.size()) throw DimensionError("checkpoint: params and ema differ in length");
  std::vector<unsigned char> buf{'F', 'M', 'C', 'K'};
  detail::put_le<std::uint32_t>(buf, kCheckpointVersion);
  detail::put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) detail::put_le<double>(buf, params(i));
  for (Eigen::Index i = 0; i < ema.size(); ++i) detail::put_le<double>(buf, ema(i));
  return buf;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const auto buf = encode_checkpoint(ck.params, ck.ema_params);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing checkpoint " + path);
  }
  auto kv = model_config_entries(ck.config);
  for (const auto& [k, v] : ck.extra) kv.set(k, v);
  kv.save(path + ".cfg");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), "FMCK", 4) != 0) throw IoError(path + " is not an FMCK checkpoint");
  std::size_t pos = 4;
  const auto version = detail::get_le<std::uint32_t>(buf, pos, path);
  if (version != kCheckpointVersion) throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  const auto n = detail::get_le<std::uint64_t>(buf, pos, path);
  if (buf.size() != pos + 16 * n) throw IoError("checkpoint " + path + " has the wrong length for " + std::to_string(n) + " parameters");
  Checkpoint ck;
  ck.params.resize(static_cast<Eigen::Index>(n));
  ck.ema_params.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < ck.params.size(); ++i) ck.params(i) = detail::get_le<double>(buf, pos, path);
  for (Eigen::Index i = 0; i < ck.ema_params.size(); ++i) ck.ema_params(i) = detail::get_le<double>(buf, pos, path);

  const auto kv = io::KeyValueConfig::load(path + ".cfg");
  ck.config = model_config_from(kv);
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("model.", 0) != 0) ck.extra[k] = v;
  }
  if (ParamLayout(ck.config).total != static_cast<Eigen::Index>(n)) {
    throw DimensionError("checkpoint " + path + " holds " + std::to_string(n) +
                         " parameters but its architecture needs " + std::to_string(ParamLayout(ck.config).total));
  }
  return ck;
}

}  // namespace fmlab::nn
