#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fmlab/core/condition.hpp"
#include "fmlab/core/error.hpp"
#include "fmlab/core/flow_matching.hpp"
#include "fmlab/core/random.hpp"
#include "fmlab/core/sample.hpp"
#include "fmlab/core/schedule.hpp"
#include "fmlab/mask/binary_mask.hpp"
#include "fmlab/nn/train_state.hpp"
#include "fmlab/nn/velocity_model.hpp"

namespace fmlab::nn {

struct TrainConfig {
  std::uint64_t steps = 2000;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double ema_decay = 0.9999;
  double p_drop = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must lie in [0, 1)");
    fm::check_drop_probability(p_drop);
  }
};

struct TrainingPair {
  Sample x1;
  Condition y;
};

struct InjectionPair {
  Sample image;
  mask::BinaryMask mask;
};

struct LossRecord {
  std::uint64_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<LossRecord> log;
};

/// A fixed minibatch: regression inputs and targets for one optimizer step.
struct Batch {
  Eigen::MatrixXd x_t;  // data_dim x B
  Eigen::MatrixXd u_t;
  std::vector<double> t;
  std::vector<Condition> y;
};

/// Mean squared velocity error of `model` on a batch (per-element mean, as fm_loss).
inline double batch_loss(const VelocityModel& model, const Batch& b) {
  const Eigen::MatrixXd pred = model.forward(b.x_t, b.t, b.y);
  return (pred - b.u_t).squaredNorm() / static_cast<double>(pred.size());
}

/// Loss and parameter gradient on a batch.
inline double batch_gradient(const VelocityModel& model, const Batch& b, Eigen::VectorXd& grads) {
  VelocityModel::Cache cache;
  const Eigen::MatrixXd pred = model.forward(b.x_t, b.t, b.y, &cache);
  const Eigen::MatrixXd diff = pred - b.u_t;
  const double n = static_cast<double>(pred.size());
  grads = model.backward(cache, (2.0 / n) * diff);
  return diff.squaredNorm() / n;
}

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> column(const Sample& s) {
  return Eigen::Map<const Eigen::VectorXd>(s.data().data(), static_cast<Eigen::Index>(s.size()));
}

inline void fill_normal(Eigen::Ref<Eigen::VectorXd> v, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
}

inline std::size_t pick_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng));
}

/// Draws one flow-matching minibatch: x0 ~ N(0, I), t ~ U(0, 1), xi ~ N(0, I), a
/// dataset element, and the condition after dropout.
inline Batch draw_fm_batch(std::span<const TrainingPair> data, const PathSchedule& sched, std::size_t batch,
                           double p_drop, Rng& rng) {
  const auto dim = static_cast<Eigen::Index>(data.front().x1.size());
  Batch b;
  b.x_t.resize(dim, static_cast<Eigen::Index>(batch));
  b.u_t.resize(dim, static_cast<Eigen::Index>(batch));
  Eigen::VectorXd x0(dim), xi(dim);
  for (std::size_t j = 0; j < batch; ++j) {
    const auto& pair = data[pick_index(rng, data.size())];
    fill_normal(x0, rng);
    const double t = uniform01(rng);
    fill_normal(xi, rng);
    const auto x1 = column(pair.x1);
    const auto col = static_cast<Eigen::Index>(j);
    b.x_t.col(col) = sched.alpha(t) * x0 + sched.beta(t) * x1 + sched.g(t) * xi;
    b.u_t.col(col) = sched.alpha_dot(t) * x0 + sched.beta_dot(t) * x1 + sched.g_dot(t) * xi;
    b.t.push_back(t);
    b.y.push_back(fm::condition_dropout(pair.y, p_drop, rng));
  }
  return b;
}

/// Draws one rectified minibatch: an independent background as x0, a crack pair as
/// (x1, y), t ~ U(0, 1) and eps ~ N(0, I).
inline Batch draw_rf_batch(std::span<const InjectionPair> pairs, std::span<const Sample> backgrounds,
                           const RectifiedSchedule& sched, std::size_t batch, double p_drop, Rng& rng) {
  const auto dim = static_cast<Eigen::Index>(pairs.front().image.size());
  Batch b;
  b.x_t.resize(dim, static_cast<Eigen::Index>(batch));
  b.u_t.resize(dim, static_cast<Eigen::Index>(batch));
  Eigen::VectorXd eps(dim);
  for (std::size_t j = 0; j < batch; ++j) {
    const auto& pair = pairs[pick_index(rng, pairs.size())];
    const auto x0 = column(backgrounds[pick_index(rng, backgrounds.size())]);
    const double t = uniform01(rng);
    fill_normal(eps, rng);
    const auto x1 = column(pair.image);
    const double p = sched.phi(t);
    const auto col = static_cast<Eigen::Index>(j);
    b.x_t.col(col) = (1.0 - p) * x0 + p * x1 + sched.noise_scale(t) * eps;
    b.u_t.col(col) = sched.phi_dot(t) * (x1 - x0);
    b.t.push_back(t);
    b.y.push_back(fm::condition_dropout(Condition::map(mask::one_hot(pair.mask)), p_drop, rng));
  }
  return b;
}

template <class DrawBatch>
TrainResult run_training(VelocityModel& model, const TrainConfig& cfg, TrainState state, DrawBatch&& draw) {
  Rng rng(cfg.seed);
  TrainResult out;
  out.log.reserve(static_cast<std::size_t>(cfg.steps));
  Eigen::VectorXd grads;
  for (std::uint64_t s = 0; s < cfg.steps; ++s) {
    const Batch b = draw(rng);
    const double loss = batch_gradient(model, b, grads);
    if (!std::isfinite(loss)) throw TrainingError("training diverged: loss is not finite", state.step);
    state = ema_update(adam_step(std::move(state), grads));
    model.set_params(state.params);
    out.log.push_back({state.step, loss});
  }
  out.state = std::move(state);
  return out;
}

}  // namespace detail

inline TrainState initial_state(const VelocityModel& model, const TrainConfig& cfg) {
  return TrainState::from_params(model.params(), cfg.lr, cfg.ema_decay);
}

/// Conditional flow-matching training on (x1, y) pairs. Updates `model` in place to
/// the final raw parameters; the EMA copy is in the returned state.
inline TrainResult train_fm(VelocityModel& model, std::span<const TrainingPair> data, const PathSchedule& sched,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw TrainingError("no training pairs");
  for (const auto& p : data) {
    if (!(p.x1.shape() == model.config().data_shape)) {
      throw DimensionError("training sample shape " + p.x1.shape().to_string() + " differs from model shape " +
                           model.config().data_shape.to_string());
    }
  }
  return detail::run_training(model, cfg, initial_state(model, cfg), [&](Rng& rng) {
    return detail::draw_fm_batch(data, sched, cfg.batch_size, cfg.p_drop, rng);
  });
}

/// Rectified-flow training of the background injector: x0 is a background drawn
/// independently of the crack pair (x1, mask).
inline TrainResult train_rf_injector(VelocityModel& model, std::span<const InjectionPair> pairs,
                                     std::span<const Sample> backgrounds, const RectifiedSchedule& sched,
                                     const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw TrainingError("no training pairs");
  if (backgrounds.empty()) throw TrainingError("no backgrounds");
  if (model.config().mode != ConditioningMode::mask_conditional) {
    throw ConfigError("the injector must be a mask-conditioned model");
  }
  const Shape& shape = model.config().data_shape;
  for (const auto& p : pairs) {
    if (!(p.image.shape() == shape)) throw DimensionError("crack image shape differs from model shape");
    if (shape.rank() != 3 || p.mask.height() != shape.dims()[0] || p.mask.width() != shape.dims()[1]) {
      throw DimensionError("crack mask dims differ from the image raster");
    }
  }
  for (const auto& bg : backgrounds) {
    if (!(bg.shape() == shape)) throw DimensionError("background shape differs from model shape");
  }
  return detail::run_training(model, cfg, initial_state(model, cfg), [&](Rng& rng) {
    return detail::draw_rf_batch(pairs, backgrounds, sched, cfg.batch_size, cfg.p_drop, rng);
  });
}

/// A batch drawn once with its own seed, for monitoring loss on fixed inputs.
inline Batch probe_batch(std::span<const TrainingPair> data, const PathSchedule& sched, std::size_t batch,
                         std::uint64_t seed) {
  if (data.empty()) throw TrainingError("no training pairs");
  Rng rng(seed);
  return detail::draw_fm_batch(data, sched, batch, 0.0, rng);
}

inline Batch probe_batch(std::span<const InjectionPair> pairs, std::span<const Sample> backgrounds,
                         const RectifiedSchedule& sched, std::size_t batch, std::uint64_t seed) {
  if (pairs.empty()) throw TrainingError("no training pairs");
  Rng rng(seed);
  return detail::draw_rf_batch(pairs, backgrounds, sched, batch, 0.0, rng);
}

}  // namespace fmlab::nn
