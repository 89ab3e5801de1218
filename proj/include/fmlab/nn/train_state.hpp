#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "fmlab/core/error.hpp"

namespace fmlab::nn {

struct TrainState {
  Eigen::VectorXd params;
  Eigen::VectorXd ema_params;
  std::uint64_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  double ema_decay = 0.9999;

  static TrainState from_params(Eigen::VectorXd p, double lr = 1e-3, double ema_decay = 0.9999) {
    TrainState s;
    s.ema_params = p;
    s.m = Eigen::VectorXd::Zero(p.size());
    s.v = Eigen::VectorXd::Zero(p.size());
    s.params = std::move(p);
    s.lr = lr;
    s.ema_decay = ema_decay;
    s.validate();
    return s;
  }

  void validate() const {
    const auto n = params.size();
    if (ema_params.size() != n || m.size() != n || v.size() != n) {
      throw DimensionError("train state: params, ema and moment vectors differ in length");
    }
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw DomainError("ema_decay must lie in [0, 1)");
    if (!(lr >= 0.0)) throw DomainError("learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw DomainError("adam betas must lie in [0, 1)");
  }
};

/// One Adam update with bias correction; increments step.
inline TrainState adam_step(TrainState s, const Eigen::VectorXd& grads) {
  if (grads.size() != s.params.size()) {
    throw DimensionError("adam_step: gradient has " + std::to_string(grads.size()) + " entries, expected " +
                         std::to_string(s.params.size()));
  }
  if (!grads.allFinite()) throw TrainingError("adam_step: non-finite gradient", s.step);
  s.step += 1;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  s.params.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps_adam);
  if (!s.params.allFinite()) throw TrainingError("adam_step: parameters became non-finite", s.step);
  return s;
}

/// ema <- d ema + (1 - d) params.
inline TrainState ema_update(TrainState s) {
  const double d = s.ema_decay;
  s.ema_params = d * s.ema_params + (1.0 - d) * s.params;
  return s;
}

}  // namespace fmlab::nn
