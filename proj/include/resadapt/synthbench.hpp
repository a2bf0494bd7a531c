#ifndef RESADAPT_SYNTHBENCH_HPP_
#define RESADAPT_SYNTHBENCH_HPP_

// Synthetic domain-shift tasks, CSV ingestion and the comparison methods.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "resadapt/domain_batch.hpp"
#include "resadapt/model.hpp"
#include "resadapt/trainer.hpp"

namespace resadapt {

enum class Generator { kTwoMoons, kGaussianBlobs };

Generator parse_generator(std::string_view name);
std::string_view to_string(Generator g);

/// Source samples come from the generator; target samples are an independent
/// draw mapped through x -> affine * R(rotation) * x + translation.
struct ShiftSpec {
  Generator generator = Generator::kTwoMoons;
  double rotation_deg = 35.0;
  Eigen::Matrix2d affine = Eigen::Matrix2d::Identity();
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  double noise = 0.1;
  int n_source = 500;
  int n_target = 500;
  std::uint64_t seed = 1;
};

void validate(const ShiftSpec& spec);

/// Labeled source and target batches (domain labels 0 and 1).
std::pair<DomainBatch, DomainBatch> generate(const ShiftSpec& spec);

/// Samples of the unshifted distribution, labels 0/1 in equal halves.
DomainBatch sample_distribution(Generator g, int n, double noise, std::mt19937_64& rng);

/// Header `f0,...,fk,label,domain`; empty label cells mark unlabeled rows.
DomainBatch load_csv(const std::string& path);
DomainBatch parse_csv(std::string_view text);
std::string to_csv(const DomainBatch& batch);

enum class Method { kOurs, kSourceOnly, kSharedAdversarial, kFixedRank };

Method parse_method(std::string_view name);
std::string_view to_string(Method m);

struct MethodResult {
  TwoStreamModel model;
  TrainResult training;
  EvalResult source_eval;
  EvalResult target_eval;  // accuracy NaN when the target carries no labels
};

/// Runs one method end to end through the shared trainer:
///   ours               pretrain, init transforms, run_training
///   source-only        pretrain, evaluate (no target rows are read for training)
///   shared-adversarial run_training with every rank forced to 0
///   fixed-rank         run_training with lambda_r = 0
MethodResult run_method(Method method, const DomainBatch& source, const DomainBatch& target,
                        const TrainConfig& cfg, ModelShape shape = {});

}  // namespace resadapt

#endif  // RESADAPT_SYNTHBENCH_HPP_
