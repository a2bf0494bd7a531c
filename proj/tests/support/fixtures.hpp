#ifndef RESADAPT_TESTS_FIXTURES_HPP_
#define RESADAPT_TESTS_FIXTURES_HPP_

// Small models and data sets shared by the unit and acceptance tests.

#include <functional>
#include <random>

#include "oracles.hpp"
#include "resadapt/losses.hpp"
#include "resadapt/residual_transform.hpp"
#include "resadapt/synthbench.hpp"
#include "resadapt/trainer.hpp"

namespace fixture {

struct LossContext {
  resadapt::TwoStreamModel model;
  resadapt::DomainBatch source;
  resadapt::DomainBatch target;
};

/// Two-moons batches of 16 + 16 rows, an MLP 2 -> 6 -> 5 -> 2 with rank-2
/// transforms and unlabeled target rows.
inline LossContext small_context(std::uint64_t seed) {
  resadapt::ShiftSpec spec;
  spec.n_source = 16;
  spec.n_target = 16;
  spec.seed = seed;
  auto [source, target] = resadapt::generate(spec);
  std::mt19937_64 rng(seed + 101);
  resadapt::ModelShape shape;
  shape.hidden = {6, 5};
  shape.dc_hidden = 4;
  LossContext ctx{resadapt::make_model(shape, rng), std::move(source), resadapt::strip_labels(target)};
  resadapt::TrainConfig cfg;
  cfg.seed = seed + 7;
  cfg.initial_rank = 2;
  cfg.init_scale = 0.5;
  resadapt::init_transforms(ctx.model, cfg);
  return ctx;
}

/// True when no entry of any layer's inner transform lies within margin of the
/// leaky-relu kink.
inline bool smooth(const resadapt::TwoStreamModel& model, double margin = 1e-3) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto inner = resadapt::inner_transform(model.layers[i].theta, model.transforms[i]);
    if (inner.size() > 0 && inner.cwiseAbs().minCoeff() <= margin) return false;
  }
  return true;
}

/// Every trainable matrix of a model, in a fixed order, for perturbation tests.
inline std::vector<resadapt::DenseMatrix*> parameters(resadapt::TwoStreamModel& m) {
  std::vector<resadapt::DenseMatrix*> out;
  for (auto& l : m.layers) out.push_back(&l.theta);
  for (auto& t : m.transforms) {
    for (auto* p : {&t.a1, &t.a2, &t.b1, &t.b2, &t.d}) {
      if (p->size() > 0) out.push_back(p);
    }
  }
  out.push_back(&m.head.theta);
  return out;
}

/// Pointer to slot k of vars, following fixture::parameters ordering.
inline resadapt::Var* var_slot(resadapt::ModelVars& vars, std::size_t k) {
  if (k < vars.layers.size()) return &vars.layers[k];
  k -= vars.layers.size();
  for (std::size_t i = 0; i < vars.transforms.size(); ++i) {
    for (resadapt::Var* v : {&vars.transforms[i].a1, &vars.transforms[i].a2, &vars.transforms[i].b1, &vars.transforms[i].b2,
                   &vars.transforms[i].d}) {
      if (v->value().size() == 0) continue;
      if (k == 0) return v;
      --k;
    }
  }
  return &vars.head;
}

/// Worst finite-difference error of loss over every trainable matrix of model.
inline double model_fd_error(resadapt::TwoStreamModel& model,
                             const std::function<resadapt::Var(resadapt::Tape&, const resadapt::ModelVars&)>& loss) {
  auto params = parameters(model);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const resadapt::DenseMatrix at = *params[k];
    auto fn = [&](resadapt::Tape& tape, const resadapt::Var& x) {
      resadapt::ModelVars vars = resadapt::bind(tape, model, false);
      *var_slot(vars, k) = x;
      return loss(tape, vars);
    };
    resadapt::Tape tape;
    const resadapt::Var x = tape.leaf(at);
    tape.backward(fn(tape, x));
    auto value = [&](const oracle::Mat& p) {
      resadapt::Tape t;
      return fn(t, t.leaf(p)).value()(0, 0);
    };
    worst = std::max(worst, oracle::relative_error(x.grad(), oracle::central_difference(value, at, 1e-5)));
  }
  return worst;
}

}  // namespace fixture

#endif  // RESADAPT_TESTS_FIXTURES_HPP_
