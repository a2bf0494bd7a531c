#ifndef RESADAPT_ADAM_HPP_
#define RESADAPT_ADAM_HPP_

#include <cmath>

#include "resadapt/errors.hpp"
#include "resadapt/types.hpp"

namespace resadapt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates of one parameter matrix.
struct AdamState {
  DenseMatrix m;
  DenseMatrix v;
  long step = 0;
};

/// One bias-corrected Adam update of params in place.
inline void adam_step(DenseMatrix& params, const DenseMatrix& grad, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
  if (grad.rows() != params.rows() || grad.cols() != params.cols()) {
    throw DimensionError("adam_step: gradient shape differs from parameters");
  }
  if (state.m.rows() != params.rows() || state.m.cols() != params.cols()) {
    state.m = DenseMatrix::Zero(params.rows(), params.cols());
    state.v = DenseMatrix::Zero(params.rows(), params.cols());
    state.step = 0;
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + cfg.epsilon);
}

}  // namespace resadapt

#endif  // RESADAPT_ADAM_HPP_
