// Acceptance checks. Prints one line per criterion and exits nonzero when any
// selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "resadapt/experiment.hpp"
#include "resadapt/matrixize.hpp"
#include "resadapt/prox.hpp"

using namespace resadapt;
namespace fs = std::filesystem;

namespace {

constexpr double kProxGapTol = 1e-5;
constexpr double kProxSeconds = 30.0;
constexpr double kGradTol = 1e-4;
constexpr double kStreamTol = 1e-12;
constexpr double kKinkMargin = 1e-4;
constexpr double kIdenticalTol = 1e-12;
constexpr int kMaxZeroRound = 3;
constexpr double kNormalTol = 1e-8;
constexpr double kResidualSlack = 1e-12;
constexpr double kGainOverSourceOnly = 0.10;
constexpr double kGainOverShared = 0.02;
constexpr double kMinRankReduction = 0.5;
constexpr double kEfficacySeconds = 300.0;

const std::string kFixtures = RESADAPT_FIXTURE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// 1
Outcome prox_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  oracle::Rng rng(2024);
  std::uniform_int_distribution<int> size(2, 6);
  double worst = 0.0;
  double lowest = std::numeric_limits<double>::infinity();
  int failures = 0;
  const int instances = 100;
  for (int k = 0; k < instances; ++k) {
    const oracle::Mat t_hat = oracle::uniform(size(rng), size(rng), rng, -2.0, 2.0);
    ProxConfig cfg;
    cfg.lambda_r = k % 2 == 0 ? 0.1 : 1.0;
    cfg.step = (k / 2) % 2 == 0 ? 0.01 : 0.1;
    const auto n = t_hat.rows();
    const DenseMatrix t_star = prox_two_step(t_hat, cfg, n);
    const double got = oracle::group_lasso_objective(t_star, t_hat, cfg.lambda_r, cfg.step, static_cast<double>(n));
    const double best = oracle::group_lasso_subgradient_min(t_hat, cfg.lambda_r, cfg.step, static_cast<double>(n), 2000);
    const double gap = std::abs(got - best);
    worst = std::max(worst, gap);
    lowest = std::min(lowest, got - best);
    if (gap > kProxGapTol) ++failures;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < kProxSeconds,
          std::to_string(failures) + "/" + std::to_string(instances) + " instances above gap " + num(kProxGapTol) +
              ", max gap " + num(worst) +
              ", lowest signed gap " + num(lowest) + ", " + num(secs) + " s"};
}

std::vector<int> domain_labels(Eigen::Index ns, Eigen::Index nt) {
  std::vector<int> d(static_cast<std::size_t>(ns), kSourceDomain);
  d.resize(static_cast<std::size_t>(ns + nt), kTargetDomain);
  return d;
}

Var both_features(Tape& tape, const ModelVars& v, const DomainBatch& source, const DomainBatch& target) {
  const Var fs_ = features(v, stream_parameters(v, Stream::kSource), tape.constant(source.inputs));
  const Var ft = features(v, stream_parameters(v, Stream::kTarget), tape.constant(target.inputs));
  return ad::vstack(fs_, ft);
}

/// Finite-difference error of the domain-classifier loss over its own parameters.
double dc_fd_error(const fixture::LossContext& ctx) {
  DenseMatrix f(ctx.source.size() + ctx.target.size(), ctx.model.feature_dim());
  f << features(ctx.model, ctx.source.inputs, Stream::kSource), features(ctx.model, ctx.target.inputs, Stream::kTarget);
  const auto domains = domain_labels(ctx.source.size(), ctx.target.size());
  double worst = 0.0;
  for (int which = 0; which < 2; ++which) {
    auto loss = [&](Tape& tape, const Var& x) {
      DomainClassifierVars clf = bind(tape, ctx.model.domain_clf, false);
      (which == 0 ? clf.hidden : clf.output) = x;
      return domain_classifier_loss(tape.constant(f), domains, clf);
    };
    const DenseMatrix at = which == 0 ? ctx.model.domain_clf.hidden.theta : ctx.model.domain_clf.output.theta;
    Tape tape;
    const Var x = tape.leaf(at);
    tape.backward(loss(tape, x));
    auto value = [&](const oracle::Mat& p) {
      Tape t;
      return loss(t, t.leaf(p)).value()(0, 0);
    };
    worst = std::max(worst, oracle::relative_error(x.grad(), oracle::central_difference(value, at, 1e-5)));
  }
  return worst;
}

fixture::LossContext smooth_context(std::uint64_t& seed) {
  while (true) {
    fixture::LossContext ctx = fixture::small_context(seed++);
    if (fixture::smooth(ctx.model, kKinkMargin)) return ctx;
  }
}

fixture::LossContext two_moons_context(std::uint64_t& seed) {
  while (true) {
    const std::uint64_t s = seed++;
    ShiftSpec spec;
    spec.n_source = 32;
    spec.n_target = 32;
    spec.seed = s;
    auto [source, target] = generate(spec);
    std::mt19937_64 rng(s);
    fixture::LossContext ctx{make_model(ModelShape{}, rng), std::move(source), strip_labels(target)};
    TrainConfig cfg;
    cfg.seed = s;
    init_transforms(ctx.model, cfg);
    if (fixture::smooth(ctx.model, kKinkMargin)) return ctx;
  }
}

// 2
Outcome gradient_integrity() {
  const ProxConfig prox;
  const LossOptions opts{1.0, false};
  std::map<std::string, double> worst;
  std::uint64_t seed = 1;
  std::uint64_t moons_seed = 1;
  for (int point = 0; point < 10; ++point) {
    fixture::LossContext ctx = smooth_context(seed);
    const auto domains = domain_labels(ctx.source.size(), ctx.target.size());
    auto track = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };
    track("classification", fixture::model_fd_error(ctx.model, [&](Tape& t, const ModelVars& v) {
            const Var f = features(v, stream_parameters(v, Stream::kSource), t.constant(ctx.source.inputs));
            return classification_loss(logits(v, f), ctx.source.labels);
          }));
    track("domain-classifier", dc_fd_error(ctx));
    track("discrepancy", fixture::model_fd_error(ctx.model, [&](Tape& t, const ModelVars& v) {
            return discrepancy_loss(both_features(t, v, ctx.source, ctx.target), domains, ctx.model.domain_clf);
          }));
    track("stream", fixture::model_fd_error(ctx.model, [&](Tape& t, const ModelVars& v) {
            std::vector<Var> residuals;
            std::vector<bool> structure;
            for (std::size_t i = 0; i < v.layers.size(); ++i) {
              residuals.push_back(residual(v.layers[i], v.transforms[i]));
              structure.push_back(ctx.model.transforms[i].l() > 0 && ctx.model.transforms[i].r() > 0);
            }
            return stream_loss(t, residuals, structure, 1.0);
          }));
    track("fixed", fixture::model_fd_error(ctx.model, [&](Tape& t, const ModelVars& v) {
            return fixed_loss(t, v, ctx.model, ctx.source, ctx.target, opts).total;
          }));
    track("full", fixture::model_fd_error(ctx.model, [&](Tape& t, const ModelVars& v) {
            return full_loss(t, v, ctx.model, ctx.source, ctx.target, opts, prox);
          }));
    fixture::LossContext moons = two_moons_context(moons_seed);
    track("two-moons model", fixture::model_fd_error(moons.model, [&](Tape& t, const ModelVars& v) {
            return full_loss(t, v, moons.model, moons.source, moons.target, opts, prox);
          }));
  }
  bool pass = true;
  std::string detail = "max rel. error";
  for (const auto& [name, err] : worst) {
    pass = pass && err < kGradTol;
    detail += " " + name + " " + num(err) + ",";
  }
  detail.back() = ' ';
  detail += "(10 points, tolerance " + num(kGradTol) + ")";
  return {pass, detail};
}

// 3
Outcome analytic_fixtures() {
  std::vector<std::string> failed;
  const double value = stream_loss_value(1.0, 1.0);
  {
    Tape tape;
    const Var r = tape.leaf(DenseMatrix::Constant(1, 1, 1.0));
    const double ad_value = stream_loss(tape, {r}, {true}, 1.0).value()(0, 0);
    if (std::abs(value - 1.0) > kStreamTol || std::abs(ad_value - 1.0) > kStreamTol) failed.push_back("stream loss");
  }

  oracle::Rng rng(33);
  std::uniform_int_distribution<int> dim(1, 9);
  for (int k = 0; k < 20; ++k) {
    const int n = dim(rng), c = dim(rng) + 1, l = dim(rng), r = dim(rng);
    const DenseMatrix theta = oracle::gaussian(n, c, rng);
    TransformParams t = make_transform(n, c, l, r, Nonlinearity::kLeakyRelu, k % 2 == 0);
    t.a1 = oracle::gaussian(n, l, rng);
    t.a2 = oracle::gaussian(c, r, rng).cwiseProduct(column_block_mask(t));
    t.b2 = oracle::gaussian(c, r, rng).cwiseProduct(column_block_mask(t));
    t.d = oracle::gaussian(l, r, rng);
    if (!(apply_transform(theta, t) == theta)) failed.push_back("zero residual");
    if (!(apply_transform(theta, make_transform(n, c, 0, 0, Nonlinearity::kLeakyRelu, false)) == theta)) {
      failed.push_back("rank-0 transform");
    }
  }

  std::uniform_int_distribution<int> big(1, 64);
  for (int k = 0; k < 20; ++k) {
    const std::int64_t n = big(rng), c = big(rng), l = big(rng), r = big(rng), kk = big(rng);
    if (param_count_matrix_form(n, c, l, r) != oracle::matrix_form_entries(n, c, l, r)) {
      failed.push_back("matrix-form count");
    }
    if (param_count_vector_form(n, c, kk) != oracle::vector_form_entries(n, c, kk)) failed.push_back("vector-form count");
    const TransformParams t = make_transform(n, c, l, r, Nonlinearity::kLeakyRelu, false);
    const std::int64_t entries = t.a1.size() + t.a2.size() + t.b1.size() + t.b2.size() + t.d.size();
    if (entries != oracle::matrix_form_entries(n, c, r, l)) failed.push_back("allocated entries");
  }

  for (int k = 0; k < 20; ++k) {
    const DenseMatrix w = oracle::gaussian(dim(rng), dim(rng), rng);
    const DenseVector b = oracle::gaussian(w.rows(), 1, rng);
    const FcParams fc = matrix_to_fc(fc_to_matrix(w, b));
    if (!(fc.weights == w) || !(*fc.bias == b)) failed.push_back("fc round trip");
    ConvKernel kernel(dim(rng), dim(rng), 1 + k % 3, 1 + k % 4);
    std::normal_distribution<double> normal;
    for (double& v : kernel.data) v = normal(rng);
    const DenseVector cb = oracle::gaussian(kernel.n_out, 1, rng);
    const ConvParams conv = matrix_to_conv(conv_to_matrix(kernel, cb));
    if (!(conv.kernel == kernel) || !(*conv.bias == cb)) failed.push_back("conv round trip");
  }

  if (failed.empty()) {
    return {true, "stream loss " + num(value) + ", zero residual bitwise, 20 count tuples, 40 round trips exact"};
  }
  std::string detail = "failed:";
  for (const auto& f : failed) detail += " " + f;
  return {false, detail};
}

/// Column shrink then row shrink with explicit loops.
oracle::Mat column_stage(const oracle::Mat& t_hat, double shrink) {
  oracle::Mat out = t_hat;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double norm = oracle::col_norm(out, j);
    const double s = norm <= shrink ? 0.0 : 1.0 - shrink / norm;
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) *= s;
  }
  return out;
}

bool history_non_increasing(const RankReport& r) {
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    if (r.history[i].rank_sum > r.history[i - 1].rank_sum) return false;
  }
  return true;
}

// 4
Outcome sparsification() {
  std::vector<std::string> failed;
  oracle::Rng rng(44);
  std::uniform_int_distribution<int> size(1, 8);
  long zero_groups = 0;
  for (int k = 0; k < 200; ++k) {
    const oracle::Mat t_hat = oracle::uniform(size(rng), size(rng), rng, -1.0, 1.0);
    ProxConfig cfg;
    cfg.lambda_r = 0.5 + 0.5 * (k % 4);
    cfg.step = 0.1;
    const auto n = t_hat.rows();
    const double shrink = 2.0 * cfg.step * cfg.lambda_r * std::sqrt(static_cast<double>(n));
    const DenseMatrix t_star = prox_two_step(t_hat, cfg, n);
    const oracle::Mat t_bar = column_stage(t_hat, shrink);
    for (Eigen::Index j = 0; j < t_hat.cols(); ++j) {
      if (oracle::col_norm(t_hat, j) > shrink) continue;
      ++zero_groups;
      for (Eigen::Index i = 0; i < t_hat.rows(); ++i) {
        if (t_star(i, j) != 0.0) failed.push_back("column not exactly zero");
      }
    }
    for (Eigen::Index i = 0; i < t_hat.rows(); ++i) {
      if (oracle::row_norm(t_bar, i) > shrink) continue;
      ++zero_groups;
      for (Eigen::Index j = 0; j < t_hat.cols(); ++j) {
        if (t_star(i, j) != 0.0) failed.push_back("row not exactly zero");
      }
    }
  }

  const auto [source, target] = generate(ShiftSpec{});
  int zero_round = -1;
  double diff = 0.0;
  for (double lambda_r : {0.1, 1.0, 1e3}) {
    TrainConfig cfg;
    cfg.lambda_r = lambda_r;
    const MethodResult res = run_method(Method::kOurs, source, target, cfg);
    const auto& history = res.training.ranks.history;
    if (!history_non_increasing(res.training.ranks)) failed.push_back("rank history increases");
    if (lambda_r < 1e3) continue;
    for (std::size_t i = 1; i < history.size(); ++i) {
      if (history[i].rank_sum == 0) {
        zero_round = static_cast<int>(i);
        break;
      }
    }
    if (zero_round < 1 || zero_round > kMaxZeroRound) failed.push_back("ranks not zero within 3 rounds");
    const DenseMatrix x = concat(source, target).inputs;
    diff = (logits(res.model, x, Stream::kTarget) - logits(res.model, x, Stream::kSource)).cwiseAbs().maxCoeff();
    if (!(diff < kIdenticalTol)) failed.push_back("streams differ");
  }
  std::string detail = std::to_string(zero_groups) + " groups at or below threshold, ranks zero after round " +
                       std::to_string(zero_round) + ", stream difference " + num(diff);
  if (!failed.empty()) detail = "failed: " + failed.front() + "; " + detail;
  return {failed.empty(), detail};
}

// 5
Outcome least_squares() {
  oracle::Rng rng(55);
  std::uniform_int_distribution<int> dim(2, 8);
  double worst_normal = 0.0;
  int worse_residual = 0;
  for (int k = 0; k < 50; ++k) {
    const int n = dim(rng), c = dim(rng) + 1;
    std::uniform_int_distribution<int> lr(1, std::min(n, c));
    const int l = lr(rng), r = lr(rng);
    const oracle::Mat theta = oracle::gaussian(n, c, rng);
    const TransformParams shape = make_transform(n, c, l, r, Nonlinearity::kLeakyRelu, true);
    const oracle::Mat mask = column_block_mask(shape);
    const oracle::Mat a1_hat = oracle::gaussian(n, l, rng, 0.5);
    const oracle::Mat a2_hat = oracle::gaussian(c, r, rng, 0.5).cwiseProduct(mask);
    const oracle::Mat d = oracle::gaussian(l, r, rng, 0.5);
    const oracle::Mat t_star = oracle::gaussian(l, r, rng);
    const RecoveredFactors got = ls_recover(theta, d, t_star, a1_hat, a2_hat, &mask);

    const oracle::Mat target = t_star - d;
    const oracle::Mat p = theta * a2_hat;
    const oracle::Mat g1 = (got.a1 - a1_hat) + p * (got.a1.transpose() * p - target).transpose();
    const oracle::Mat m = got.a1.transpose() * theta;
    const oracle::Mat g2 = ((got.a2 - a2_hat) + m.transpose() * (m * got.a2 - target)).cwiseProduct(mask);
    const oracle::Mat off = got.a2.cwiseProduct(oracle::Mat::Ones(c, r) - mask);
    worst_normal = std::max({worst_normal, g1.cwiseAbs().maxCoeff(), g2.cwiseAbs().maxCoeff(), off.cwiseAbs().maxCoeff()});

    const double before = std::sqrt(oracle::dist_sq(oracle::inner(theta, a1_hat, a2_hat, d), t_star));
    const double after = std::sqrt(oracle::dist_sq(oracle::inner(theta, got.a1, got.a2, d), t_star));
    if (after > before * (1.0 + kResidualSlack)) ++worse_residual;
  }
  return {worst_normal <= kNormalTol && worse_residual == 0,
          "50 instances, max normal-equation residual " + num(worst_normal) + ", " + std::to_string(worse_residual) +
              " with a larger transform residual"};
}

// 6
Outcome efficacy() {
  const auto t0 = std::chrono::steady_clock::now();
  double ours = 0.0, source_only = 0.0, shared = 0.0;
  long before = 0, after = 0;
  const int seeds = 5;
  for (int seed = 1; seed <= seeds; ++seed) {
    ShiftSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto [source, target] = generate(spec);
    TrainConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.lambda_s = 1.0;
    cfg.lambda_r = 1.0;
    const MethodResult o = run_method(Method::kOurs, source, target, cfg);
    ours += o.target_eval.accuracy / seeds;
    before += static_cast<long>(o.training.ranks.history.front().rank_sum);
    after += static_cast<long>(o.model.rank_sum());
    source_only += run_method(Method::kSourceOnly, source, target, cfg).target_eval.accuracy / seeds;
    shared += run_method(Method::kSharedAdversarial, source, target, cfg).target_eval.accuracy / seeds;
  }
  const double reduction = before > 0 ? 1.0 - static_cast<double>(after) / static_cast<double>(before) : 0.0;
  const double secs = seconds_since(t0);
  const bool pass = ours >= source_only + kGainOverSourceOnly && ours >= shared + kGainOverShared &&
                    reduction >= kMinRankReduction && secs < kEfficacySeconds;
  return {pass, "mean target accuracy ours " + num(ours) + ", source-only " + num(source_only) + ", shared " +
                    num(shared) + ", rank reduction " + num(100.0 * reduction) + "%, " + num(secs) + " s"};
}

// 7
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "resadapt-acceptance-determinism";
  fs::remove_all(root);
  ExperimentConfig cfg = load_config(kFixtures + "/moons_small.conf");
  std::ostringstream out, err;
  cfg.output_dir = (root / "a").string();
  const int rc_a = cmd_run(cfg, out, err);
  cfg.output_dir = (root / "b").string();
  const int rc_b = cmd_run(cfg, out, err);
  bool same = rc_a == kExitOk && rc_b == kExitOk;
  for (const char* f : {"metrics.csv", "ranks.json"}) {
    same = same && fs::exists(root / "a" / f) && read_file(root / "a" / f) == read_file(root / "b" / f);
  }
  fs::remove_all(root);
  return {same, same ? "metrics.csv and ranks.json byte-identical" : "outputs differ (" + err.str() + ")"};
}

// 8
Outcome report_fidelity() {
  std::ostringstream out, err;
  const int rc = cmd_report_ranks(kFixtures + "/svhn_ranks.json", out, err);
  const std::string expected = read_file(kFixtures + "/svhn_ranks_table.txt");
  const bool pass = rc == kExitOk && out.str() == expected;
  return {pass, pass ? "table matches the fixture exactly" : "table differs:\n" + out.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria = {prox_oracle, gradient_integrity, analytic_fixtures,
                                                          sparsification, least_squares, efficacy,
                                                          determinism, report_fidelity};
  bool all = true;
  for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) {
    if (only != 0 && only != i) continue;
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(i - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << i << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
