#include "resadapt/losses.hpp"

#include <cmath>
#include <string>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace {

DenseVector domain_targets(const std::vector<int>& domain_labels, bool flip) {
  DenseVector y(static_cast<Eigen::Index>(domain_labels.size()));
  for (std::size_t i = 0; i < domain_labels.size(); ++i) {
    const int d = domain_labels[i];
    if (d != kSourceDomain && d != kTargetDomain) throw ValidationError("domain label must be 0 or 1");
    y(static_cast<Eigen::Index>(i)) = flip ? 1.0 - d : static_cast<double>(d);
  }
  return y;
}

}  // namespace

Var classification_loss(const Var& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw DimensionError("classification_loss: one label per logit row expected");
  }
  std::vector<Eigen::Index> rows;
  std::vector<int> kept;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kUnlabeled) {
      rows.push_back(static_cast<Eigen::Index>(i));
      kept.push_back(labels[i]);
    }
  }
  if (rows.empty()) throw ValidationError("classification_loss: no labeled rows");
  const Var selected = rows.size() == labels.size() ? logits : ad::select_rows(logits, rows);
  return ad::softmax_cross_entropy(selected, one_hot(kept, static_cast<int>(logits.cols())));
}

Var domain_classifier_loss(const Var& features, const std::vector<int>& domain_labels,
                           const DomainClassifierVars& clf) {
  if (!features.value().allFinite()) throw ValidationError("domain_classifier_loss: non-finite features");
  return ad::sigmoid_cross_entropy(domain_logits(clf, features), domain_targets(domain_labels, false));
}

Var discrepancy_loss(const Var& features, const std::vector<int>& domain_labels,
                     const DomainClassifier& clf) {
  if (!features.value().allFinite()) throw ValidationError("discrepancy_loss: non-finite features");
  const DomainClassifierVars frozen = bind(*features.tape(), clf, false);
  return ad::sigmoid_cross_entropy(domain_logits(frozen, features), domain_targets(domain_labels, true));
}

double stream_loss_value(double l_omega, double lambda_s) {
  if (!(l_omega > 0.0)) {
    throw BarrierDomainError("stream loss barrier evaluated at L_w = " + std::to_string(l_omega) +
                             "; the residual transforms are all zero");
  }
  return lambda_s * (l_omega - std::log(l_omega));
}

Var stream_loss(Tape& tape, const std::vector<Var>& residuals, const std::vector<bool>& has_structure,
                double lambda_s) {
  if (residuals.size() != has_structure.size()) throw DimensionError("stream_loss: flag per residual expected");
  Var l_omega;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (!has_structure[i]) continue;
    const Var term = ad::frobenius_sq(residuals[i]);
    l_omega = l_omega.valid() ? l_omega + term : term;
  }
  if (!l_omega.valid()) return tape.constant(DenseMatrix::Zero(1, 1));
  stream_loss_value(l_omega.value()(0, 0), lambda_s);  // domain check
  return ad::scale(l_omega - ad::log(l_omega), lambda_s);
}

double residual_energy(const TwoStreamModel& model) {
  double total = 0.0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    total += residual(model.layers[i].theta, model.transforms[i]).squaredNorm();
  }
  return total;
}

LossTerms fixed_loss(Tape& tape, const ModelVars& vars, const TwoStreamModel& model,
                     const DomainBatch& source, const DomainBatch& target, const LossOptions& opts) {
  if (source.size() == 0 || target.size() == 0) {
    throw ValidationError("fixed_loss needs rows from both domains");
  }
  const Var xs = tape.constant(source.inputs);
  const Var xt = tape.constant(target.inputs);

  std::vector<Var> target_params;
  std::vector<Var> residuals;
  std::vector<bool> structure;
  for (std::size_t i = 0; i < vars.layers.size(); ++i) {
    const Var res = residual(vars.layers[i], vars.transforms[i]);
    residuals.push_back(res);
    structure.push_back(model.transforms[i].l() > 0 && model.transforms[i].r() > 0);
    target_params.push_back(res + vars.layers[i]);
  }

  const Var fs = features(vars, vars.layers, xs);
  const Var ft = features(vars, target_params, xt);
  const Var zs = logits(vars, fs);

  LossTerms terms;
  if (opts.supervised && target.labeled_count() > 0) {
    std::vector<int> labels = source.labels;
    labels.insert(labels.end(), target.labels.begin(), target.labels.end());
    terms.l_class = classification_loss(ad::vstack(zs, logits(vars, ft)), labels);
  } else {
    terms.l_class = classification_loss(zs, source.labels);
  }

  std::vector<int> domains(static_cast<std::size_t>(source.size()), kSourceDomain);
  domains.resize(static_cast<std::size_t>(source.size() + target.size()), kTargetDomain);
  terms.l_disc = discrepancy_loss(ad::vstack(fs, ft), domains, model.domain_clf);
  terms.l_stream = stream_loss(tape, residuals, structure, opts.lambda_s);
  terms.total = terms.l_class + terms.l_disc + terms.l_stream;
  return terms;
}

double group_lasso_regularizer(const TwoStreamModel& model, const ProxConfig& prox) {
  double total = 0.0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const DenseMatrix t = inner_transform(model.layers[i].theta, model.transforms[i]);
    total += group_lasso_penalty(t, prox, model.layers[i].rows());
  }
  return total;
}

Var group_lasso_regularizer(Tape& tape, const ModelVars& vars, const TwoStreamModel& model,
                            const ProxConfig& prox) {
  Var total = tape.constant(DenseMatrix::Zero(1, 1));
  for (std::size_t i = 0; i < vars.layers.size(); ++i) {
    const TransformParams& t = model.transforms[i];
    if (t.l() == 0 || t.r() == 0) continue;
    const Var inner = inner_transform(vars.layers[i], vars.transforms[i]);
    const double n = static_cast<double>(model.layers[i].rows());
    const double wc = prox.weight == GroupWeight::kLayerRows ? n : static_cast<double>(t.l());
    const double wr = prox.weight == GroupWeight::kLayerRows ? n : static_cast<double>(t.r());
    total = total + ad::scale(ad::column_norm_sum(inner), std::sqrt(wc)) +
            ad::scale(ad::row_norm_sum(inner), std::sqrt(wr));
  }
  return total;
}

Var full_loss(Tape& tape, const ModelVars& vars, const TwoStreamModel& model, const DomainBatch& source,
              const DomainBatch& target, const LossOptions& opts, const ProxConfig& prox) {
  const Var fixed = fixed_loss(tape, vars, model, source, target, opts).total;
  if (prox.lambda_r == 0.0) return fixed;
  return fixed + ad::scale(group_lasso_regularizer(tape, vars, model, prox), prox.lambda_r);
}

FullLossValue full_loss(const TwoStreamModel& model, const DomainBatch& source,
                        const DomainBatch& target, const LossOptions& opts, const ProxConfig& prox) {
  Tape tape;
  const ModelVars vars = bind(tape, model, false);
  FullLossValue out;
  out.fixed = fixed_loss(tape, vars, model, source, target, opts).total.value()(0, 0);
  out.regularizer = group_lasso_regularizer(model, prox);
  out.total = out.fixed + prox.lambda_r * out.regularizer;
  return out;
}

FusionConfig make_fusion_config(const std::vector<std::size_t>& layers,
                                const std::vector<Eigen::Index>& widths, Eigen::Index dim,
                                std::mt19937_64& rng) {
  if (layers.empty() || layers.size() != widths.size()) {
    throw ConfigurationError("fusion needs one width per fused layer and at least one layer");
  }
  if (dim < 1) throw ConfigurationError("fusion projection dimension must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  FusionConfig cfg;
  cfg.layers = layers;
  cfg.dim = dim;
  for (Eigen::Index n : widths) {
    DenseMatrix r(n, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) r(i, j) = normal(rng);
    }
    cfg.projections.push_back(std::move(r));
  }
  return cfg;
}

Var rman_fusion(const std::vector<Var>& layer_outputs, const FusionConfig& cfg) {
  if (layer_outputs.empty()) throw ConfigurationError("rman_fusion: no layer outputs");
  if (cfg.projections.size() != layer_outputs.size()) {
    throw ConfigurationError("rman_fusion: " + std::to_string(layer_outputs.size()) + " layer outputs but " +
                             std::to_string(cfg.projections.size()) + " projections");
  }
  Tape& tape = *layer_outputs.front().tape();
  Var fused;
  for (std::size_t j = 0; j < layer_outputs.size(); ++j) {
    if (cfg.projections[j].cols() != cfg.dim) throw DimensionError("rman_fusion: projection width differs from D");
    const Var p = layer_outputs[j] * tape.constant(cfg.projections[j]);
    fused = fused.valid() ? ad::hadamard(fused, p) : p;
  }
  return ad::scale(fused, 1.0 / std::sqrt(static_cast<double>(cfg.dim)));
}

}  // namespace resadapt
