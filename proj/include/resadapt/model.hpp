#ifndef RESADAPT_MODEL_HPP_
#define RESADAPT_MODEL_HPP_

// Two-stream network: a source stream of fully connected layers, one residual
// transform per layer generating the target stream, a classifier head shared
// by both streams and the auxiliary domain classifier.

#include <random>
#include <string>
#include <vector>

#include "resadapt/matrixize.hpp"
#include "resadapt/residual_transform.hpp"
#include "resadapt/types.hpp"

namespace resadapt {

enum class Stream { kSource, kTarget };

/// feature-dim -> hidden -> 1 MLP with logistic output.
struct DomainClassifier {
  LayerParamMatrix hidden;
  LayerParamMatrix output;
  Nonlinearity activation = Nonlinearity::kTanh;
};

struct TwoStreamModel {
  std::vector<std::string> layer_names;
  std::vector<LayerParamMatrix> layers;     // source stream
  std::vector<TransformParams> transforms;  // one per layer
  LayerParamMatrix head;
  DomainClassifier domain_clf;
  Nonlinearity activation = Nonlinearity::kTanh;

  std::size_t depth() const { return layers.size(); }
  Eigen::Index feature_dim() const { return layers.empty() ? 0 : layers.back().rows(); }
  Eigen::Index num_classes() const { return head.rows(); }
  /// Sum of l + r over all transforms.
  Eigen::Index rank_sum() const;
};

struct ModelShape {
  Eigen::Index input_dim = 2;
  std::vector<Eigen::Index> hidden = {16, 16};
  Eigen::Index num_classes = 2;
  Eigen::Index dc_hidden = 16;
  Nonlinearity activation = Nonlinearity::kTanh;
  Nonlinearity dc_activation = Nonlinearity::kTanh;
};

/// Glorot-uniform weights, zero biases, empty (rank-0) transforms.
TwoStreamModel make_model(const ModelShape& shape, std::mt19937_64& rng);

/// Checks layer chaining and transform shapes.
void validate(const TwoStreamModel& model);

/// Parameter matrices of one stream; the target stream is generated on demand.
std::vector<DenseMatrix> stream_parameters(const TwoStreamModel& model, Stream stream);

DenseMatrix dense_layer(const DenseMatrix& x, const LayerParamMatrix& layer);
DenseMatrix features(const TwoStreamModel& model, const DenseMatrix& x, Stream stream);
DenseMatrix logits(const TwoStreamModel& model, const DenseMatrix& x, Stream stream);
/// Logistic output of the domain classifier, one entry per row.
DenseVector domain_probability(const DomainClassifier& clf, const DenseMatrix& features);

struct DomainClassifierVars {
  Var hidden;
  Var output;
  Nonlinearity activation = Nonlinearity::kTanh;
};

DomainClassifierVars bind(Tape& tape, const DomainClassifier& clf, bool trainable);
Var domain_logits(const DomainClassifierVars& clf, const Var& features);

struct ModelVars {
  std::vector<Var> layers;
  std::vector<TransformVars> transforms;
  Var head;
  Nonlinearity activation = Nonlinearity::kTanh;
};

/// Records stream, transform and head parameters (not the domain classifier).
ModelVars bind(Tape& tape, const TwoStreamModel& model, bool trainable);

std::vector<Var> stream_parameters(const ModelVars& vars, Stream stream);
Var features(const ModelVars& vars, const std::vector<Var>& stream_params, const Var& x);
Var logits(const ModelVars& vars, const Var& features);

}  // namespace resadapt

#endif  // RESADAPT_MODEL_HPP_
