#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "fmlab/core/condition.hpp"
#include "fmlab/core/error.hpp"
#include "fmlab/core/flow_matching.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/core/sample.hpp"
#include "fmlab/mask/binary_mask.hpp"

namespace fmlab::ode {

enum class Method { euler, heun };

inline constexpr double kDivergenceBound = 1e6;

struct IntegratorConfig {
  Method method = Method::euler;
  int steps = 50;
  std::optional<double> cfg_omega;

  void validate() const {
    if (steps < 1) throw DomainError("integrator needs steps >= 1, got " + std::to_string(steps));
    if (cfg_omega && !std::isfinite(*cfg_omega)) throw DomainError("cfg_omega must be finite");
  }
};

/// Anything with `Eigen::MatrixXd velocity(const Eigen::MatrixXd& x, double t,
/// std::span<const Condition> y) const`, where columns of x are samples.
template <class F>
concept VelocityField = requires(const F& f, const Eigen::MatrixXd& x, double t, std::span<const Condition> y) {
  { f.velocity(x, t, y) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// Adapts a per-sample closure v(x, t, y) to the batched field interface.
class FunctionField {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double, const Condition&)>;
  explicit FunctionField(Fn fn) : fn_(std::move(fn)) {}

  Eigen::MatrixXd velocity(const Eigen::MatrixXd& x, double t, std::span<const Condition> y) const {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = fn_(x.col(j), t, y[static_cast<std::size_t>(j)]);
    return out;
  }

 private:
  Fn fn_;
};

/// v(x, t, y), or its guided combination with v(x, t, null) when cfg_omega is set.
template <VelocityField F>
Eigen::MatrixXd evaluate(const F& field, const Eigen::MatrixXd& x, double t, std::span<const Condition> y,
                         const std::optional<double>& cfg_omega) {
  Eigen::MatrixXd v = field.velocity(x, t, y);
  if (!cfg_omega) return v;
  const std::vector<Condition> nulls(y.size(), Condition::none());
  const Eigen::MatrixXd vu = field.velocity(x, t, nulls);
  const double w = *cfg_omega;
  return v.binaryExpr(vu, [w](double c, double u) { return fm::cfg_mix(c, u, w); });
}

/// Integrates dx/dt = v(x, t, y) from t = 0 to 1 in K uniform steps for every
/// column of x0. Euler evaluates at the left endpoint t_k = k / K; Heun is the
/// trapezoidal predictor-corrector.
template <VelocityField F>
Eigen::MatrixXd integrate_batch(const F& field, Eigen::MatrixXd x, std::span<const Condition> y,
                                const IntegratorConfig& cfg) {
  cfg.validate();
  if (y.size() != static_cast<std::size_t>(x.cols())) throw DimensionError("integrate: need one condition per sample");
  if (!x.allFinite()) throw NumericError("integrate: initial state is not finite");
  const int k_steps = cfg.steps;
  const double h = 1.0 / static_cast<double>(k_steps);
  for (int k = 0; k < k_steps; ++k) {
    const double t0 = static_cast<double>(k) / k_steps;
    const Eigen::MatrixXd v0 = evaluate(field, x, t0, y, cfg.cfg_omega);
    if (cfg.method == Method::euler) {
      x += h * v0;
    } else {
      const double t1 = static_cast<double>(k + 1) / k_steps;
      const Eigen::MatrixXd pred = x + h * v0;
      const Eigen::MatrixXd v1 = evaluate(field, pred, t1, y, cfg.cfg_omega);
      x += (0.5 * h) * (v0 + v1);
    }
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceBound) {
      throw NumericError("integration diverged at step " + std::to_string(k + 1) + " of " + std::to_string(k_steps));
    }
  }
  return x;
}

template <VelocityField F>
Sample integrate(const F& field, const Sample& x0, const Condition& y, const IntegratorConfig& cfg) {
  const Eigen::MatrixXd start = Eigen::Map<const Eigen::VectorXd>(x0.data().data(), static_cast<Eigen::Index>(x0.size()));
  const std::vector<Condition> ys{y};
  const Eigen::MatrixXd out = integrate_batch(field, start, ys, cfg);
  return Sample(x0.shape(), std::vector<double>(out.data(), out.data() + out.size()));
}

inline Condition mask_condition(const Shape& shape, const mask::BinaryMask& m) {
  if (shape.rank() != 3 || shape[0] != m.height() || shape[1] != m.width()) {
    throw DimensionError("mask " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                         " does not match raster shape " + shape.to_string());
  }
  return Condition::map(mask::one_hot(m));
}

/// Same numerics as integrate, started from a background image and conditioned on
/// the two-channel one-hot encoding of the mask.
template <VelocityField F>
Sample integrate_from_background(const F& field, const Sample& background, const mask::BinaryMask& m,
                                 const IntegratorConfig& cfg) {
  return integrate(field, background, mask_condition(background.shape(), m), cfg);
}

/// Columns are processed in fixed chunks of this size, so results do not depend on
/// the number of worker threads.
inline constexpr std::size_t kChunk = 256;

/// Integrates many samples, splitting the columns into fixed chunks that run on up
/// to `threads` workers. Output equals the single-threaded run bit for bit.
template <VelocityField F>
Eigen::MatrixXd integrate_many(const F& field, const Eigen::MatrixXd& x0, std::span<const Condition> y,
                               const IntegratorConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  if (y.size() != static_cast<std::size_t>(x0.cols())) throw DimensionError("integrate: need one condition per sample");
  const std::size_t n = static_cast<std::size_t>(x0.cols());
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  Eigen::MatrixXd out(x0.rows(), x0.cols());
  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t len = std::min(kChunk, n - begin);
    const auto b = static_cast<Eigen::Index>(begin), l = static_cast<Eigen::Index>(len);
    out.middleCols(b, l) = integrate_batch(field, Eigen::MatrixXd(x0.middleCols(b, l)), y.subspan(begin, len), cfg);
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return out;
  }
  std::exception_ptr failure;
  std::mutex lock;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += workers) {
        try {
          run_chunk(c);
        } catch (...) {
          const std::lock_guard<std::mutex> g(lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Column i is N(0, I) drawn from seeds[i].
inline Eigen::MatrixXd noise_batch(std::size_t dim, std::span<const std::uint64_t> seeds) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(seeds.size()));
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    Rng rng(seeds[i]);
    const auto v = standard_normal(rng, dim);
    x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(dim));
  }
  return x;
}

/// Base draws for a generation batch: column i is N(0, I) from seed derive_seed(seed, i).
inline Eigen::MatrixXd noise_batch(std::size_t dim, std::size_t count, std::uint64_t seed, std::uint64_t first_index = 0) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = derive_seed(seed, first_index + i);
  return noise_batch(dim, seeds);
}

/// Samples one output per condition from N(0, I) base draws.
template <VelocityField F>
std::vector<Sample> generate(const F& field, const Shape& shape, std::span<const Condition> y, std::uint64_t seed,
                             const IntegratorConfig& cfg, unsigned threads = 1) {
  const Eigen::MatrixXd x = integrate_many(field, noise_batch(shape.size(), y.size(), seed), y, cfg, threads);
  std::vector<Sample> out;
  out.reserve(y.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.emplace_back(shape, std::vector<double>(x.col(j).data(), x.col(j).data() + x.rows()));
  }
  return out;
}

}  // namespace fmlab::ode
