#ifndef RESADAPT_LOSSES_HPP_
#define RESADAPT_LOSSES_HPP_

#include <random>
#include <vector>

#include "resadapt/domain_batch.hpp"
#include "resadapt/model.hpp"
#include "resadapt/prox.hpp"
#include "resadapt/types.hpp"

namespace resadapt {

/// Mean cross-entropy over the rows of `logits` whose label is not
/// kUnlabeled. Throws ValidationError when no row is labeled.
Var classification_loss(const Var& logits, const std::vector<int>& labels);

/// Binary cross-entropy of the domain classifier against domain labels
/// (0 = source, 1 = target), probabilities clipped to [1e-12, 1 - 1e-12].
Var domain_classifier_loss(const Var& features, const std::vector<int>& domain_labels,
                           const DomainClassifierVars& clf);

/// Domain classifier loss with flipped labels. The classifier parameters enter
/// as constants: gradients reach the features only.
Var discrepancy_loss(const Var& features, const std::vector<int>& domain_labels,
                     const DomainClassifier& clf);

/// lambda_s (L_w - ln L_w) with L_w the summed squared Frobenius norm of the
/// residuals. Residuals of rank-0 transforms carry no parameters and are
/// skipped; when nothing remains the term is a constant zero. Throws
/// BarrierDomainError when L_w is exactly zero.
Var stream_loss(Tape& tape, const std::vector<Var>& residuals, const std::vector<bool>& has_structure,
                double lambda_s);

/// lambda_s (L_w - ln L_w) for a known L_w > 0.
double stream_loss_value(double l_omega, double lambda_s);

/// Summed squared Frobenius norm of every layer's residual.
double residual_energy(const TwoStreamModel& model);

struct LossOptions {
  double lambda_s = 1.0;
  bool supervised = false;  // use labeled target rows in the classification term
};

struct LossTerms {
  Var l_class;
  Var l_disc;
  Var l_stream;
  Var total;
};

/// L_class + L_disc + L_stream. Source rows run through the source stream,
/// target rows through the generated target stream; the domain classifier
/// sees the last hidden features of both.
LossTerms fixed_loss(Tape& tape, const ModelVars& vars, const TwoStreamModel& model,
                     const DomainBatch& source, const DomainBatch& target, const LossOptions& opts);

struct FullLossValue {
  double fixed = 0.0;
  double regularizer = 0.0;  // sum over layers of R_c + R_r at T
  double total = 0.0;
};

/// L_fixed + lambda_r (R_c + R_r), evaluated for reporting.
FullLossValue full_loss(const TwoStreamModel& model, const DomainBatch& source,
                        const DomainBatch& target, const LossOptions& opts, const ProxConfig& prox);

/// Sum over layers of R_c + R_r at the current inner transforms.
double group_lasso_regularizer(const TwoStreamModel& model, const ProxConfig& prox);

/// Differentiable forms of the two functions above.
Var group_lasso_regularizer(Tape& tape, const ModelVars& vars, const TwoStreamModel& model, const ProxConfig& prox);
Var full_loss(Tape& tape, const ModelVars& vars, const TwoStreamModel& model, const DomainBatch& source,
              const DomainBatch& target, const LossOptions& opts, const ProxConfig& prox);

/// Random multilinear fusion of several layer outputs.
struct FusionConfig {
  std::vector<std::size_t> layers;        // indices of the fused layer outputs
  Eigen::Index dim = 0;                   // projection dimensionality D
  std::vector<DenseMatrix> projections;   // N_j x D, frozen
};

/// Projections drawn from N(0, 1) for layers of the given output widths.
FusionConfig make_fusion_config(const std::vector<std::size_t>& layers,
                                const std::vector<Eigen::Index>& widths, Eigen::Index dim,
                                std::mt19937_64& rng);

/// f = (1/sqrt(D)) * hadamard_j(f_j R_j), one row per sample.
Var rman_fusion(const std::vector<Var>& layer_outputs, const FusionConfig& cfg);

}  // namespace resadapt

#endif  // RESADAPT_LOSSES_HPP_
