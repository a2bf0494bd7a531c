#include "resadapt/check.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "resadapt/config.hpp"
#include "resadapt/errors.hpp"
#include "resadapt/finite_diff.hpp"
#include "resadapt/losses.hpp"
#include "resadapt/matrixize.hpp"
#include "resadapt/prox.hpp"
#include "resadapt/report.hpp"
#include "resadapt/synthbench.hpp"

namespace resadapt {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTolerance = 1e-4;
constexpr int kFdPoints = 3;
constexpr int kProxInstances = 20;
constexpr int kSubgradientIters = 2000;
constexpr double kKinkMargin = 1e-3;

using Rng = std::mt19937_64;

DenseMatrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  DenseMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

DenseMatrix uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  DenseMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

/// Moves entries out of (-margin, margin) so piecewise ops are smooth within the FD stencil.
DenseMatrix away_from_zero(DenseMatrix m, double margin) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double& v = m.data()[i];
    if (std::abs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
  }
  return m;
}

/// Identity on values; the backward pass returns twice the upstream gradient.
Var corrupt(const Var& v) {
  return v.tape()->record(v.value(), {v}, [v](Tape& t, const DenseMatrix& g) { t.accumulate(v, 2.0 * g); });
}

struct GradientProbe {
  std::string name;
  std::function<DenseMatrix(Rng&)> point;
  std::function<Var(Tape&, const Var&)> op;
};

struct LossContext {
  TwoStreamModel model;
  DomainBatch source;
  DomainBatch target;
};

LossContext make_loss_context(Rng& rng) {
  ShiftSpec spec;
  spec.n_source = 16;
  spec.n_target = 16;
  spec.seed = rng();
  auto [source, target] = generate(spec);
  LossContext ctx{{}, std::move(source), std::move(target)};
  ModelShape shape;
  shape.hidden = {6, 5};
  shape.dc_hidden = 4;
  ctx.model = make_model(shape, rng);
  TrainConfig cfg;
  cfg.seed = rng();
  cfg.initial_rank = 2;
  cfg.init_scale = 0.5;
  init_transforms(ctx.model, cfg);
  ctx.target = strip_labels(ctx.target);
  return ctx;
}

bool transform_smooth_at(const DenseMatrix& theta, const TransformParams& t) {
  const DenseMatrix inner = inner_transform(theta, t);
  return inner.size() == 0 || inner.cwiseAbs().minCoeff() > kKinkMargin;
}

std::vector<GradientProbe> gradient_probes(std::uint64_t seed) {
  auto ctx = std::make_shared<LossContext>();
  {
    Rng rng(seed ^ 0x5bd1e995ULL);
    *ctx = make_loss_context(rng);
  }
  auto shape = [](Eigen::Index r, Eigen::Index c) {
    return [r, c](Rng& rng) { return gaussian(r, c, rng); };
  };
  auto constant = [](Tape& tape, Eigen::Index r, Eigen::Index c, std::uint64_t s) {
    Rng rng(s);
    return tape.constant(gaussian(r, c, rng));
  };
  std::vector<int> domains(16, kSourceDomain);
  domains.resize(32, kTargetDomain);

  std::vector<GradientProbe> p;
  p.push_back({"add", shape(3, 4), [=](Tape& t, const Var& x) { return x + constant(t, 3, 4, 1); }});
  p.push_back({"sub", shape(3, 4), [=](Tape& t, const Var& x) { return constant(t, 3, 4, 2) - x; }});
  p.push_back({"scale", shape(3, 4), [](Tape&, const Var& x) { return ad::scale(x, -1.7); }});
  p.push_back({"hadamard", shape(3, 4), [=](Tape& t, const Var& x) { return ad::hadamard(x, constant(t, 3, 4, 3)); }});
  p.push_back({"transpose", shape(3, 4), [](Tape&, const Var& x) { return ad::transpose(x); }});
  p.push_back({"matmul", shape(3, 4), [=](Tape& t, const Var& x) { return constant(t, 2, 3, 4) * x * constant(t, 4, 2, 5); }});
  p.push_back({"tanh", shape(3, 4), [](Tape&, const Var& x) { return ad::elementwise(x, Nonlinearity::kTanh); }});
  p.push_back({"relu", [](Rng& rng) { return away_from_zero(gaussian(3, 4, rng), 0.05); },
               [](Tape&, const Var& x) { return ad::elementwise(x, Nonlinearity::kRelu); }});
  p.push_back({"leaky-relu", [](Rng& rng) { return away_from_zero(gaussian(3, 4, rng), 0.05); },
               [](Tape&, const Var& x) { return ad::elementwise(x, Nonlinearity::kLeakyRelu); }});
  p.push_back({"frobenius_sq", shape(3, 4), [](Tape&, const Var& x) { return ad::frobenius_sq(x); }});
  p.push_back({"sum", shape(3, 4), [](Tape&, const Var& x) { return ad::sum(x); }});
  p.push_back({"log", [](Rng& rng) { return uniform(3, 4, rng, 0.5, 2.0); },
               [](Tape&, const Var& x) { return ad::log(x); }});
  p.push_back({"column_norm_sum", shape(3, 4), [](Tape&, const Var& x) { return ad::column_norm_sum(x); }});
  p.push_back({"row_norm_sum", shape(3, 4), [](Tape&, const Var& x) { return ad::row_norm_sum(x); }});
  p.push_back({"dense_layer", shape(4, 3), [=](Tape& t, const Var& x) { return ad::dense_layer(constant(t, 5, 2, 6), x); }});
  p.push_back({"vstack", shape(3, 4), [=](Tape& t, const Var& x) { return ad::vstack(x, constant(t, 2, 4, 7)); }});
  p.push_back({"select_rows", shape(4, 3), [](Tape&, const Var& x) { return ad::select_rows(x, {0, 2, 2}); }});
  p.push_back({"softmax_cross_entropy", shape(4, 3), [](Tape&, const Var& x) {
                 DenseMatrix y = DenseMatrix::Zero(4, 3);
                 y(0, 1) = y(1, 0) = y(2, 2) = y(3, 1) = 1.0;
                 return ad::softmax_cross_entropy(x, y);
               }});
  p.push_back({"sigmoid_cross_entropy", shape(5, 1), [](Tape&, const Var& x) {
                 DenseVector y(5);
                 y << 0.0, 1.0, 1.0, 0.0, 1.0;
                 return ad::sigmoid_cross_entropy(x, y);
               }});
  p.push_back({"residual_transform",
               [ctx](Rng& rng) {
                 DenseMatrix theta;
                 do {
                   theta = gaussian(6, 3, rng);
                 } while (!transform_smooth_at(theta, ctx->model.transforms[0]));
                 return theta;
               },
               [ctx](Tape& t, const Var& x) {
                 return apply_transform(x, bind(t, ctx->model.transforms[0], false));
               }});
  p.push_back({"classification_loss", shape(6, 2), [](Tape&, const Var& x) {
                 return classification_loss(x, {0, 1, kUnlabeled, 1, 0, 0});
               }});
  p.push_back({"domain_classifier_loss", shape(32, 5), [ctx, domains](Tape& t, const Var& x) {
                 return domain_classifier_loss(x, domains, bind(t, ctx->model.domain_clf, false));
               }});
  p.push_back({"discrepancy_loss", shape(32, 5), [ctx, domains](Tape&, const Var& x) {
                 return discrepancy_loss(x, domains, ctx->model.domain_clf);
               }});
  p.push_back({"stream_loss", shape(6, 3), [=](Tape& t, const Var& x) {
                 return stream_loss(t, {x, constant(t, 5, 7, 8)}, {true, true}, 1.0);
               }});
  p.push_back({"fixed_loss",
               [ctx](Rng& rng) {
                 DenseMatrix theta;
                 do {
                   theta = ctx->model.layers[0].theta + gaussian(6, 3, rng, 0.1);
                 } while (!transform_smooth_at(theta, ctx->model.transforms[0]));
                 return theta;
               },
               [ctx](Tape& t, const Var& x) {
                 ModelVars vars = bind(t, ctx->model, false);
                 vars.layers[0] = x;
                 return fixed_loss(t, vars, ctx->model, ctx->source, ctx->target, {1.0, false}).total;
               }});
  p.push_back({"full_loss",
               [ctx](Rng& rng) {
                 DenseMatrix theta;
                 do {
                   theta = ctx->model.layers[0].theta + gaussian(6, 3, rng, 0.1);
                 } while (!transform_smooth_at(theta, ctx->model.transforms[0]));
                 return theta;
               },
               [ctx](Tape& t, const Var& x) {
                 ModelVars vars = bind(t, ctx->model, false);
                 vars.layers[0] = x;
                 ProxConfig prox;
                 prox.lambda_r = 0.5;
                 return full_loss(t, vars, ctx->model, ctx->source, ctx->target, {1.0, false}, prox);
               }});
  return p;
}

CheckResult run_probe(const GradientProbe& probe, bool broken, Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < kFdPoints; ++k) {
    const DenseMatrix at = probe.point(rng);
    Tape shape_tape;
    const Var out = probe.op(shape_tape, shape_tape.constant(at));
    const DenseMatrix weights = gaussian(out.rows(), out.cols(), rng);
    auto fn = [&](Tape& tape, const Var& x) {
      Var y = probe.op(tape, x);
      if (broken) y = corrupt(y);
      return ad::sum(ad::hadamard(y, tape.constant(weights)));
    };
    worst = std::max(worst, ad::finite_diff_check<double>(fn, at, kFdStep));
  }
  std::ostringstream detail;
  detail << "max rel error " << std::scientific << std::setprecision(2) << worst;
  return {"gradient " + probe.name, worst < kFdTolerance, detail.str()};
}

/// min over x of (1/(2s))||x - x_hat||^2 + w sum_groups ||group|| by projected
/// subgradient descent onto the ball ||x|| <= ||x_hat||, best iterate kept.
double subgradient_min(const DenseMatrix& x_hat, double s, double w, bool columns) {
  auto objective = [&](const DenseMatrix& x) {
    const double pen = columns ? x.colwise().norm().sum() : x.rowwise().norm().sum();
    return (x - x_hat).squaredNorm() / (2.0 * s) + w * pen;
  };
  const double radius = x_hat.norm();
  DenseMatrix x = x_hat;
  double best = std::min(objective(x), objective(DenseMatrix::Zero(x_hat.rows(), x_hat.cols())));
  for (int k = 0; k < kSubgradientIters; ++k) {
    DenseMatrix g = (x - x_hat) / s;
    const Eigen::Index groups = columns ? x.cols() : x.rows();
    for (Eigen::Index j = 0; j < groups; ++j) {
      const double norm = columns ? x.col(j).norm() : x.row(j).norm();
      if (norm > 0.0) {
        if (columns) {
          g.col(j) += w * x.col(j) / norm;
        } else {
          g.row(j) += w * x.row(j) / norm;
        }
      }
    }
    x -= (2.0 * s / (k + 2.0)) * g;
    const double n = x.norm();
    if (n > radius) x *= radius / n;
    best = std::min(best, objective(x));
  }
  return best;
}

CheckResult check_block_shrinkage(Rng& rng) {
  std::uniform_int_distribution<int> size(2, 6);
  const double lambdas[] = {0.1, 1.0};
  const double steps[] = {0.01, 0.1};
  int failures = 0;
  double worst = 0.0;
  for (int k = 0; k < kProxInstances; ++k) {
    const DenseMatrix t_hat = uniform(size(rng), size(rng), rng, -2.0, 2.0);
    ProxConfig cfg;
    cfg.lambda_r = lambdas[k % 2];
    cfg.step = steps[(k / 2) % 2];
    const double sqrt_n = std::sqrt(static_cast<double>(t_hat.rows()));
    const double shrink = 2.0 * cfg.step * cfg.lambda_r * sqrt_n;
    // Each stage solves (1/4t)||x - x_hat||^2 + lambda sqrt(N) sum ||group|| exactly.
    const DenseMatrix t_bar = block_soft_threshold_cols(t_hat, shrink);
    const DenseMatrix t_star = prox_two_step(t_hat, cfg, t_hat.rows());
    const auto stage_value = [&](const DenseMatrix& x, const DenseMatrix& ref, bool cols) {
      const double pen = cols ? x.colwise().norm().sum() : x.rowwise().norm().sum();
      return (x - ref).squaredNorm() / (4.0 * cfg.step) + cfg.lambda_r * sqrt_n * pen;
    };
    const double col_gap = stage_value(t_bar, t_hat, true) -
                           subgradient_min(t_hat, 2.0 * cfg.step, cfg.lambda_r * sqrt_n, true);
    const double row_gap = stage_value(t_star, t_bar, false) -
                           subgradient_min(t_bar, 2.0 * cfg.step, cfg.lambda_r * sqrt_n, false);
    worst = std::max({worst, col_gap, row_gap});
    if (col_gap > 1e-9 || row_gap > 1e-9) ++failures;
    for (Eigen::Index j = 0; j < t_hat.cols(); ++j) {
      if (t_hat.col(j).norm() <= shrink && t_bar.col(j).cwiseAbs().maxCoeff() != 0.0) ++failures;
    }
  }
  std::ostringstream detail;
  detail << kProxInstances << " instances, worst excess over subgradient search " << std::scientific
         << std::setprecision(2) << worst;
  return {"prox block shrinkage", failures == 0, detail.str()};
}

CheckResult check_ls_recovery(Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    const DenseMatrix theta = gaussian(6, 5, rng);
    TransformParams t = make_transform(6, 5, 3, 3, Nonlinearity::kLeakyRelu, true);
    const DenseMatrix mask = column_block_mask(t);
    t.a1 = gaussian(6, 3, rng);
    t.a2 = gaussian(5, 3, rng).cwiseProduct(mask);
    t.d = gaussian(3, 3, rng);
    const DenseMatrix t_star = gaussian(3, 3, rng);
    const RecoveredFactors rec = ls_recover(theta, t.d, t_star, t.a1, t.a2, &mask);
    const auto res = ls_normal_residuals(theta, t.d, t_star, t.a1, t.a2, rec, &mask);
    worst = std::max({worst, res.a1, res.a2});
  }
  std::ostringstream detail;
  detail << "max normal-equation residual " << std::scientific << std::setprecision(2) << worst;
  return {"least-squares recovery", worst <= 1e-8, detail.str()};
}

CheckResult check_round_trips(Rng& rng) {
  std::vector<std::string> broken;
  {
    const DenseMatrix w = gaussian(4, 3, rng);
    const DenseVector b = gaussian(4, 1, rng);
    const FcParams back = matrix_to_fc(fc_to_matrix(w, b));
    if (back.weights != w || !back.bias || *back.bias != b) broken.push_back("fc matrixization");
  }
  {
    ConvKernel k(3, 2, 3, 2);
    for (double& v : k.data) v = std::normal_distribution<double>()(rng);
    const DenseVector b = gaussian(3, 1, rng);
    const ConvParams back = matrix_to_conv(conv_to_matrix(k, b));
    if (!(back.kernel == k) || !back.bias || *back.bias != b) broken.push_back("conv matrixization");
  }
  {
    const DenseMatrix theta = gaussian(5, 4, rng);
    TransformParams t = make_transform(5, 4, 2, 2, Nonlinearity::kLeakyRelu, true);
    if (apply_transform(theta, t) != theta) broken.push_back("zero residual");
  }
  {
    ExperimentConfig cfg;
    cfg.train.lambda_r = 0.3;
    cfg.data.rotation_deg = 12.5;
    cfg.data_seed = 9;
    if (config_hash(parse_config(to_config_text(cfg))) != config_hash(cfg)) broken.push_back("config text");
  }
  {
    RankReport report;
    report.layers = {{"conv1", {32, 32}, {31, 31}}, {"full3", {32, 32}, {7, 7}}};
    report.history = {{0, 128}, {100, 76}};
    const RankReport back = ranks_from_json(ranks_to_json(report));
    if (ranks_to_json(back) != ranks_to_json(report)) broken.push_back("ranks json");
  }
  std::string detail = "fc, conv, zero residual, config text, ranks json";
  if (!broken.empty()) {
    detail = "mismatch:";
    for (const auto& b : broken) detail += " " + b;
  }
  return {"round trips", broken.empty(), detail};
}

}  // namespace

std::vector<std::string> gradient_probe_names() {
  std::vector<std::string> names;
  for (const auto& p : gradient_probes(0)) names.push_back(p.name);
  return names;
}

std::vector<CheckResult> run_checks(const CheckOptions& opts) {
  const auto probes = gradient_probes(opts.seed);
  if (!opts.inject_fault.empty()) {
    bool known = false;
    for (const auto& p : probes) known = known || p.name == opts.inject_fault;
    if (!known) throw ConfigurationError("unknown op '" + opts.inject_fault + "' for fault injection");
  }
  Rng rng(opts.seed);
  std::vector<CheckResult> out;
  for (const auto& p : probes) out.push_back(run_probe(p, p.name == opts.inject_fault, rng));
  out.push_back(check_block_shrinkage(rng));
  out.push_back(check_ls_recovery(rng));
  out.push_back(check_round_trips(rng));
  return out;
}

int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<CheckResult> results;
  try {
    results = run_checks(opts);
  } catch (const ConfigurationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  int failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
    if (!r.passed) ++failed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed in "
      << std::fixed << std::setprecision(2) << secs << " s\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace resadapt
