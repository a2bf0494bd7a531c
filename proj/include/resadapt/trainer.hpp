#ifndef RESADAPT_TRAINER_HPP_
#define RESADAPT_TRAINER_HPP_

// Training procedure: source pretraining, then rounds of adversarial Adam
// steps on the fixed-complexity loss, each round closed by a proximal
// group-Lasso step on every layer's inner transform, least-squares recovery
// of A1/A2 and pruning of the vanished rank components.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "resadapt/adam.hpp"
#include "resadapt/domain_batch.hpp"
#include "resadapt/losses.hpp"
#include "resadapt/model.hpp"
#include "resadapt/prox.hpp"

namespace resadapt {

struct TrainConfig {
  double lambda_s = 1.0;
  double lambda_r = 1.0;
  double lr = 1e-3;
  double prox_step = 0.025;  // t of the proximal step; 0 means "use lr"
  AdamConfig adam;
  int prox_interval = 100;
  double eps = 1e-4;
  GroupWeight group_weight = GroupWeight::kLayerRows;
  double init_scale = 0.1;
  std::uint64_t seed = 1;
  bool supervised = false;
  int epochs = 100;
  int batch_size = 64;
  int pretrain_steps = 1000;
  int initial_rank = -1;  // < 0: min(N, C, 32) per layer
  bool block_diagonal = true;
  Nonlinearity sigma = Nonlinearity::kLeakyRelu;
  int dc_updates_per_step = 3;
  int log_interval = 0;  // 0 means "use prox_interval"
  std::vector<double> layer_lambda;  // per-layer multipliers of lambda_r; empty means all 1

  double effective_prox_step() const { return prox_step > 0.0 ? prox_step : lr; }
  int effective_log_interval() const { return log_interval > 0 ? log_interval : prox_interval; }
};

void validate(const TrainConfig& cfg);

/// Proximal-step settings derived from a training configuration.
ProxConfig prox_config(const TrainConfig& cfg);

struct LayerRanks {
  std::string name;
  RankPair before;
  RankPair after;
};

struct RankHistoryPoint {
  long step = 0;
  Eigen::Index rank_sum = 0;
};

struct RankReport {
  std::vector<LayerRanks> layers;
  std::vector<RankHistoryPoint> history;
};

/// after <= before per layer, non-increasing history.
void validate(const RankReport& report);

struct MetricsRow {
  long step = 0;
  double l_class = 0.0;
  double l_disc = 0.0;
  double l_stream = 0.0;
  double reg = 0.0;
  double src_acc = 0.0;
  double tgt_acc = 0.0;
};

struct TrainResult {
  RankReport ranks;
  std::vector<MetricsRow> metrics;
};

/// Adam moments for every trainable matrix of a TwoStreamModel.
struct OptimizerState {
  std::vector<AdamState> layers;
  std::vector<std::array<AdamState, 5>> transforms;  // a1, a2, b1, b2, d
  AdamState head;
  AdamState dc_hidden;
  AdamState dc_output;

  explicit OptimizerState(std::size_t depth = 0) : layers(depth), transforms(depth) {}
};

struct EvalResult {
  double accuracy = 0.0;
  long correct = 0;
  long total = 0;
  std::vector<long> class_correct;
  std::vector<long> class_total;
};

/// Accuracy over the labeled rows of data; the target stream uses the
/// transformed parameters. Throws ValidationError without labeled rows.
EvalResult evaluate(const TwoStreamModel& model, const DomainBatch& data, Stream stream);

/// Trains source stream and head on labeled source rows for cfg.pretrain_steps
/// Adam steps. Returns the final minibatch classification loss.
double pretrain_source(TwoStreamModel& model, const DomainBatch& source, const TrainConfig& cfg);

/// Gaussian factors with std cfg.init_scale, then B1 of every layer scaled
/// by one global factor so that the summed residual energy equals 1.
void init_transforms(TwoStreamModel& model, const TrainConfig& cfg);

struct AlternationLosses {
  double l_dc = 0.0;
  double l_class = 0.0;
  double l_disc = 0.0;
  double l_stream = 0.0;
  double total = 0.0;
};

/// One domain-classifier update (descending L_DC) followed by one update of
/// streams, transforms and head (descending L_fixed). `batch` must contain
/// rows of both domains.
AlternationLosses adversarial_alternation(TwoStreamModel& model, OptimizerState& state,
                                          const DomainBatch& batch, const TrainConfig& cfg);

/// Applies prox, least-squares recovery and pruning to every layer with a
/// nonzero rank. Returns the new rank sum.
Eigen::Index prox_round(TwoStreamModel& model, OptimizerState& state, const TrainConfig& cfg);

/// Joint training after pretraining; see the file comment. Target labels, if
/// present, are only read for reporting unless cfg.supervised.
TrainResult run_training(TwoStreamModel& model, const DomainBatch& source, const DomainBatch& target,
                         const TrainConfig& cfg);

}  // namespace resadapt

#endif  // RESADAPT_TRAINER_HPP_
