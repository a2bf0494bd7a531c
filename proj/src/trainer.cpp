#include "resadapt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace {

constexpr Eigen::Index kMaxInitialRank = 32;

// Distinct streams so that pretraining, initialization and training draw
// independent sequences from one seed.
constexpr std::uint64_t kPretrainStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kInitStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kTrainStream = 0x94d049bb133111ebULL;

/// Epoch-wise shuffled minibatches over a fixed set of rows.
class BatchSampler {
 public:
  BatchSampler(std::vector<Eigen::Index> rows, std::mt19937_64& rng) : rows_(std::move(rows)), rng_(rng) {
    std::shuffle(rows_.begin(), rows_.end(), rng_);
  }

  std::vector<Eigen::Index> next(std::size_t size) {
    std::vector<Eigen::Index> out;
    out.reserve(size);
    while (out.size() < size) {
      if (pos_ == rows_.size()) {
        std::shuffle(rows_.begin(), rows_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(rows_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<Eigen::Index> rows_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

std::vector<Eigen::Index> all_rows(const DomainBatch& b) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(b.size()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return rows;
}

std::vector<Eigen::Index> labeled_rows(const DomainBatch& b) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < b.labels.size(); ++i) {
    if (b.labels[i] != kUnlabeled) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

void check_finite(double value, const char* what, long step) {
  if (!std::isfinite(value)) {
    throw TrainingError(std::string(what) + " diverged (non-finite loss) at step " + std::to_string(step), step);
  }
}

bool has_structure(const TransformParams& t) { return t.l() > 0 && t.r() > 0; }

Eigen::Index initial_rank(const TrainConfig& cfg, Eigen::Index n, Eigen::Index c) {
  const Eigen::Index bound = std::min(n, c);
  if (cfg.initial_rank < 0) return std::min(bound, kMaxInitialRank);
  return std::min<Eigen::Index>(cfg.initial_rank, bound);
}

std::vector<RankPair> current_ranks(const TwoStreamModel& model) {
  std::vector<RankPair> out;
  for (const auto& t : model.transforms) out.push_back({t.l(), t.r()});
  return out;
}

double accuracy_or_nan(const TwoStreamModel& model, const DomainBatch& data, Stream stream) {
  if (data.labeled_count() == 0) return std::numeric_limits<double>::quiet_NaN();
  return evaluate(model, data, stream).accuracy;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigurationError("learning rate must be > 0");
  if (!(cfg.prox_step >= 0.0)) throw ConfigurationError("prox_step must be >= 0");
  if (!(cfg.lambda_s >= 0.0) || !(cfg.lambda_r >= 0.0)) throw ConfigurationError("lambdas must be >= 0");
  if (cfg.prox_interval < 1) throw ConfigurationError("prox_interval must be >= 1");
  if (!(cfg.eps > 0.0)) throw ConfigurationError("eps must be > 0");
  if (cfg.epochs < 0 || cfg.pretrain_steps < 0) throw ConfigurationError("step counts must be >= 0");
  if (cfg.batch_size < 1) throw ConfigurationError("batch_size must be >= 1");
  if (cfg.dc_updates_per_step < 1) throw ConfigurationError("dc_updates_per_step must be >= 1");
  if (cfg.log_interval < 0) throw ConfigurationError("log_interval must be >= 0");
  for (double w : cfg.layer_lambda) {
    if (!(w >= 0.0)) throw ConfigurationError("layer_lambda entries must be >= 0");
  }
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0 && cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0 &&
        cfg.adam.epsilon > 0.0)) {
    throw ConfigurationError("invalid Adam constants");
  }
}

ProxConfig prox_config(const TrainConfig& cfg) {
  ProxConfig p;
  p.lambda_r = cfg.lambda_r;
  p.step = cfg.effective_prox_step();
  p.eps = cfg.eps;
  p.weight = cfg.group_weight;
  return p;
}

void validate(const RankReport& report) {
  for (const auto& layer : report.layers) {
    if (layer.before.l < 0 || layer.before.r < 0 || layer.after.l < 0 || layer.after.r < 0) {
      throw ValidationError("layer " + layer.name + ": negative rank");
    }
    if (layer.after.l > layer.before.l || layer.after.r > layer.before.r) {
      throw ValidationError("layer " + layer.name + ": rank after pruning exceeds rank before");
    }
  }
  for (std::size_t i = 1; i < report.history.size(); ++i) {
    if (report.history[i].rank_sum > report.history[i - 1].rank_sum) {
      throw ValidationError("rank history increases at step " + std::to_string(report.history[i].step));
    }
  }
}

EvalResult evaluate(const TwoStreamModel& model, const DomainBatch& data, Stream stream) {
  const auto rows = labeled_rows(data);
  if (rows.empty()) throw ValidationError("evaluate: no labeled rows");
  const DomainBatch labeled = select(data, rows);
  const DenseMatrix z = logits(model, labeled.inputs, stream);
  EvalResult res;
  res.class_correct.assign(static_cast<std::size_t>(z.cols()), 0);
  res.class_total.assign(static_cast<std::size_t>(z.cols()), 0);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index pred = 0;
    z.row(i).maxCoeff(&pred);
    const int y = labeled.labels[static_cast<std::size_t>(i)];
    if (y >= z.cols()) throw ValidationError("evaluate: label exceeds the number of classes");
    ++res.class_total[static_cast<std::size_t>(y)];
    if (pred == y) {
      ++res.correct;
      ++res.class_correct[static_cast<std::size_t>(y)];
    }
  }
  res.total = z.rows();
  res.accuracy = static_cast<double>(res.correct) / static_cast<double>(res.total);
  return res;
}

double pretrain_source(TwoStreamModel& model, const DomainBatch& source, const TrainConfig& cfg) {
  validate(cfg);
  validate(model);
  validate(source);
  const auto rows = labeled_rows(source);
  if (rows.empty()) throw ValidationError("pretraining needs labeled source rows");
  std::mt19937_64 rng(cfg.seed ^ kPretrainStream);
  BatchSampler sampler(rows, rng);
  OptimizerState state(model.depth());
  double last = std::numeric_limits<double>::quiet_NaN();
  for (long step = 1; step <= cfg.pretrain_steps; ++step) {
    const DomainBatch batch = select(source, sampler.next(static_cast<std::size_t>(cfg.batch_size)));
    Tape tape;
    std::vector<Var> layers;
    for (const auto& l : model.layers) layers.push_back(tape.leaf(l.theta));
    const Var head = tape.leaf(model.head.theta);
    Var h = tape.constant(batch.inputs);
    for (const Var& theta : layers) h = ad::elementwise(ad::dense_layer(h, theta), model.activation);
    const Var loss = classification_loss(ad::dense_layer(h, head), batch.labels);
    last = loss.value()(0, 0);
    check_finite(last, "source pretraining", step);
    tape.backward(loss);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      adam_step(model.layers[i].theta, layers[i].grad(), state.layers[i], cfg.lr, cfg.adam);
    }
    adam_step(model.head.theta, head.grad(), state.head, cfg.lr, cfg.adam);
  }
  return last;
}

void init_transforms(TwoStreamModel& model, const TrainConfig& cfg) {
  validate(cfg);
  validate(model);
  if (!(cfg.init_scale > 0.0)) {
    throw ConfigurationError("init_scale must be > 0; a zero residual lies outside the stream-loss barrier");
  }
  std::mt19937_64 rng(cfg.seed ^ kInitStream);
  std::normal_distribution<double> normal(0.0, cfg.init_scale);
  auto fill = [&](DenseMatrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
    }
  };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Eigen::Index n = model.layers[i].rows();
    const Eigen::Index c = model.layers[i].cols();
    const Eigen::Index rank = initial_rank(cfg, n, c);
    TransformParams t = make_transform(n, c, rank, rank, cfg.sigma, cfg.block_diagonal);
    fill(t.a1);
    fill(t.a2);
    fill(t.b1);
    fill(t.b2);
    fill(t.d);
    const DenseMatrix mask = column_block_mask(t);
    t.a2 = t.a2.cwiseProduct(mask);
    t.b2 = t.b2.cwiseProduct(mask);
    model.transforms[i] = std::move(t);
  }
  const double energy = residual_energy(model);
  if (energy > 0.0) {
    const double factor = 1.0 / std::sqrt(energy);
    for (auto& t : model.transforms) t.b1 *= factor;
  }
}

AlternationLosses adversarial_alternation(TwoStreamModel& model, OptimizerState& state,
                                          const DomainBatch& batch, const TrainConfig& cfg) {
  const DomainBatch source = filter_domain(batch, kSourceDomain);
  const DomainBatch target = filter_domain(batch, kTargetDomain);
  if (source.size() == 0 || target.size() == 0) {
    throw ValidationError("adversarial step needs rows from both domains");
  }
  if (state.layers.size() != model.depth()) state = OptimizerState(model.depth());
  AlternationLosses out;

  // Domain classifier on frozen features.
  {
    DenseMatrix f(batch.size(), model.feature_dim());
    f << features(model, source.inputs, Stream::kSource), features(model, target.inputs, Stream::kTarget);
    std::vector<int> domains(static_cast<std::size_t>(source.size()), kSourceDomain);
    domains.resize(static_cast<std::size_t>(batch.size()), kTargetDomain);
    for (int k = 0; k < cfg.dc_updates_per_step; ++k) {
      Tape tape;
      const DomainClassifierVars clf = bind(tape, model.domain_clf, true);
      const Var loss = domain_classifier_loss(tape.constant(f), domains, clf);
      out.l_dc = loss.value()(0, 0);
      tape.backward(loss);
      adam_step(model.domain_clf.hidden.theta, clf.hidden.grad(), state.dc_hidden, cfg.lr, cfg.adam);
      adam_step(model.domain_clf.output.theta, clf.output.grad(), state.dc_output, cfg.lr, cfg.adam);
    }
  }

  // Streams, transforms and head on the fixed-complexity loss.
  {
    Tape tape;
    const ModelVars vars = bind(tape, model, true);
    const LossTerms terms = fixed_loss(tape, vars, model, source, target, {cfg.lambda_s, cfg.supervised});
    out.l_class = terms.l_class.value()(0, 0);
    out.l_disc = terms.l_disc.value()(0, 0);
    out.l_stream = terms.l_stream.value()(0, 0);
    out.total = terms.total.value()(0, 0);
    if (!std::isfinite(out.total)) throw TrainingError("non-finite training loss", 0);
    tape.backward(terms.total);
    for (std::size_t i = 0; i < model.depth(); ++i) {
      adam_step(model.layers[i].theta, vars.layers[i].grad(), state.layers[i], cfg.lr, cfg.adam);
      TransformParams& t = model.transforms[i];
      const TransformVars& tv = vars.transforms[i];
      auto& s = state.transforms[i];
      adam_step(t.a1, tv.a1.grad(), s[0], cfg.lr, cfg.adam);
      adam_step(t.a2, tv.a2.grad(), s[1], cfg.lr, cfg.adam);
      adam_step(t.b1, tv.b1.grad(), s[2], cfg.lr, cfg.adam);
      adam_step(t.b2, tv.b2.grad(), s[3], cfg.lr, cfg.adam);
      adam_step(t.d, tv.d.grad(), s[4], cfg.lr, cfg.adam);
    }
    adam_step(model.head.theta, vars.head.grad(), state.head, cfg.lr, cfg.adam);
  }
  return out;
}

Eigen::Index prox_round(TwoStreamModel& model, OptimizerState& state, const TrainConfig& cfg) {
  if (!cfg.layer_lambda.empty() && cfg.layer_lambda.size() != model.depth()) {
    throw ConfigurationError("layer_lambda needs one entry per layer");
  }
  if (state.transforms.size() != model.depth()) state = OptimizerState(model.depth());
  for (std::size_t i = 0; i < model.depth(); ++i) {
    TransformParams& t = model.transforms[i];
    if (!has_structure(t)) continue;
    ProxConfig prox = prox_config(cfg);
    if (!cfg.layer_lambda.empty()) prox.lambda_r *= cfg.layer_lambda[i];
    const DenseMatrix& theta = model.layers[i].theta;
    const DenseMatrix t_hat = inner_transform(theta, t);
    const DenseMatrix t_star = prox_two_step(t_hat, prox, theta.rows());
    const DenseMatrix mask = column_block_mask(t);
    const RecoveredFactors rec =
        ls_recover(theta, t.d, t_star, t.a1, t.a2, t.block_partition ? &mask : nullptr);
    t.a1 = rec.a1;
    t.a2 = rec.a2;
    t = prune(t, t_star, cfg.eps);
    // Factor shapes may have changed and A1/A2 moved; restart their moments.
    state.transforms[i] = {};
  }
  return model.rank_sum();
}

TrainResult run_training(TwoStreamModel& model, const DomainBatch& source, const DomainBatch& target,
                         const TrainConfig& cfg) {
  validate(cfg);
  validate(model);
  validate(source);
  validate(target);
  if (source.size() == 0 || target.size() == 0) throw ValidationError("training needs source and target rows");
  if (!cfg.layer_lambda.empty() && cfg.layer_lambda.size() != model.depth()) {
    throw ConfigurationError("layer_lambda needs one entry per layer");
  }

  DomainBatch src = source;
  std::fill(src.domains.begin(), src.domains.end(), kSourceDomain);
  DomainBatch tgt = cfg.supervised ? target : strip_labels(target);
  std::fill(tgt.domains.begin(), tgt.domains.end(), kTargetDomain);

  std::mt19937_64 rng(cfg.seed ^ kTrainStream);
  BatchSampler src_sampler(all_rows(src), rng);
  BatchSampler tgt_sampler(all_rows(tgt), rng);
  const auto per_epoch = (std::max(src.size(), tgt.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = static_cast<long>(cfg.epochs) * static_cast<long>(per_epoch);
  const int log_every = cfg.effective_log_interval();
  const bool reduce = cfg.lambda_r > 0.0;
  const ProxConfig prox = prox_config(cfg);

  TrainResult result;
  const auto before = current_ranks(model);
  result.ranks.history.push_back({0, model.rank_sum()});

  OptimizerState state(model.depth());
  AlternationLosses acc;
  long acc_count = 0;
  for (long step = 1; step <= total_steps; ++step) {
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const DomainBatch batch = concat(select(src, src_sampler.next(bs)), select(tgt, tgt_sampler.next(bs)));
    AlternationLosses losses;
    try {
      losses = adversarial_alternation(model, state, batch, cfg);
    } catch (const BarrierDomainError& e) {
      throw TrainingError(std::string(e.what()) + " (step " + std::to_string(step) + ")", step);
    } catch (const TrainingError& e) {
      throw TrainingError(std::string(e.what()) + " (step " + std::to_string(step) + ")", step);
    }
    acc.l_class += losses.l_class;
    acc.l_disc += losses.l_disc;
    acc.l_stream += losses.l_stream;
    ++acc_count;

    if (reduce && step % cfg.prox_interval == 0) {
      result.ranks.history.push_back({step, prox_round(model, state, cfg)});
    }
    if (step % log_every == 0 || step == total_steps) {
      MetricsRow row;
      row.step = step;
      row.l_class = acc.l_class / static_cast<double>(acc_count);
      row.l_disc = acc.l_disc / static_cast<double>(acc_count);
      row.l_stream = acc.l_stream / static_cast<double>(acc_count);
      row.reg = group_lasso_regularizer(model, prox);
      row.src_acc = accuracy_or_nan(model, source, Stream::kSource);
      row.tgt_acc = accuracy_or_nan(model, target, Stream::kTarget);
      result.metrics.push_back(row);
      acc = {};
      acc_count = 0;
    }
  }

  const auto after = current_ranks(model);
  for (std::size_t i = 0; i < model.depth(); ++i) {
    result.ranks.layers.push_back({model.layer_names[i], before[i], after[i]});
  }
  validate(result.ranks);
  return result;
}

}  // namespace resadapt
