#include "resadapt/model.hpp"

#include <cmath>
#include <string>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace {

LayerParamMatrix glorot_layer(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  DenseMatrix w(out, in);
  for (Eigen::Index j = 0; j < in; ++j) {
    for (Eigen::Index i = 0; i < out; ++i) w(i, j) = u(rng);
  }
  return fc_to_matrix(w, DenseVector::Zero(out));
}

}  // namespace

Eigen::Index TwoStreamModel::rank_sum() const {
  Eigen::Index total = 0;
  for (const auto& t : transforms) total += t.l() + t.r();
  return total;
}

TwoStreamModel make_model(const ModelShape& shape, std::mt19937_64& rng) {
  if (shape.input_dim < 1 || shape.num_classes < 2 || shape.hidden.empty() || shape.dc_hidden < 1) {
    throw ConfigurationError("model needs input_dim >= 1, >= 2 classes, >= 1 hidden layer");
  }
  TwoStreamModel m;
  m.activation = shape.activation;
  Eigen::Index in = shape.input_dim;
  for (std::size_t i = 0; i < shape.hidden.size(); ++i) {
    if (shape.hidden[i] < 1) throw ConfigurationError("hidden widths must be >= 1");
    m.layer_names.push_back("fc" + std::to_string(i + 1));
    m.layers.push_back(glorot_layer(in, shape.hidden[i], rng));
    m.transforms.push_back(make_transform(shape.hidden[i], in + 1, 0, 0, Nonlinearity::kLeakyRelu, false));
    in = shape.hidden[i];
  }
  m.head = glorot_layer(in, shape.num_classes, rng);
  m.domain_clf.activation = shape.dc_activation;
  m.domain_clf.hidden = glorot_layer(in, shape.dc_hidden, rng);
  m.domain_clf.output = glorot_layer(shape.dc_hidden, 1, rng);
  return m;
}

void validate(const TwoStreamModel& model) {
  if (model.layers.empty()) throw ValidationError("model has no layers");
  if (model.transforms.size() != model.layers.size() || model.layer_names.size() != model.layers.size()) {
    throw ValidationError("model needs exactly one transform and name per layer");
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    validate(model.layers[i]);
    if (!model.layers[i].has_bias) throw ValidationError("stream layers must carry a bias column");
    validate(model.transforms[i], model.layers[i].rows(), model.layers[i].cols());
    if (i > 0 && model.layers[i].weight_cols() != model.layers[i - 1].rows()) {
      throw DimensionError("layer " + model.layer_names[i] + " does not chain with its predecessor");
    }
  }
  if (model.head.weight_cols() != model.feature_dim() ||
      model.domain_clf.hidden.weight_cols() != model.feature_dim() ||
      model.domain_clf.output.weight_cols() != model.domain_clf.hidden.rows() ||
      model.domain_clf.output.rows() != 1) {
    throw DimensionError("head or domain classifier does not match the feature dimension");
  }
}

std::vector<DenseMatrix> stream_parameters(const TwoStreamModel& model, Stream stream) {
  std::vector<DenseMatrix> out;
  out.reserve(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    out.push_back(stream == Stream::kSource ? model.layers[i].theta
                                            : apply_transform(model.layers[i].theta, model.transforms[i]));
  }
  return out;
}

namespace {

DenseMatrix affine(const DenseMatrix& x, const DenseMatrix& theta, bool has_bias) {
  const Eigen::Index in = theta.cols() - (has_bias ? 1 : 0);
  if (x.cols() != in) throw DimensionError("input width does not match layer");
  DenseMatrix y = x * theta.leftCols(in).transpose();
  if (has_bias) y.rowwise() += theta.col(in).transpose();
  return y;
}

}  // namespace

DenseMatrix dense_layer(const DenseMatrix& x, const LayerParamMatrix& layer) {
  return affine(x, layer.theta, layer.has_bias);
}

DenseMatrix features(const TwoStreamModel& model, const DenseMatrix& x, Stream stream) {
  DenseMatrix h = x;
  const auto params = stream_parameters(model, stream);
  for (std::size_t i = 0; i < params.size(); ++i) {
    h = ad::apply_nonlinearity(model.activation, affine(h, params[i], model.layers[i].has_bias));
  }
  return h;
}

DenseMatrix logits(const TwoStreamModel& model, const DenseMatrix& x, Stream stream) {
  return dense_layer(features(model, x, stream), model.head);
}

DenseVector domain_probability(const DomainClassifier& clf, const DenseMatrix& f) {
  const DenseMatrix h = ad::apply_nonlinearity(clf.activation, dense_layer(f, clf.hidden));
  const DenseVector z = dense_layer(h, clf.output).col(0);
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

DomainClassifierVars bind(Tape& tape, const DomainClassifier& clf, bool trainable) {
  auto put = [&](const DenseMatrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  return {put(clf.hidden.theta), put(clf.output.theta), clf.activation};
}

Var domain_logits(const DomainClassifierVars& clf, const Var& f) {
  const Var h = ad::elementwise(ad::dense_layer(f, clf.hidden), clf.activation);
  return ad::dense_layer(h, clf.output);
}

ModelVars bind(Tape& tape, const TwoStreamModel& model, bool trainable) {
  auto put = [&](const DenseMatrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  ModelVars v;
  v.activation = model.activation;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    v.layers.push_back(put(model.layers[i].theta));
    v.transforms.push_back(bind(tape, model.transforms[i], trainable));
  }
  v.head = put(model.head.theta);
  return v;
}

std::vector<Var> stream_parameters(const ModelVars& vars, Stream stream) {
  if (stream == Stream::kSource) return vars.layers;
  std::vector<Var> out;
  out.reserve(vars.layers.size());
  for (std::size_t i = 0; i < vars.layers.size(); ++i) {
    out.push_back(apply_transform(vars.layers[i], vars.transforms[i]));
  }
  return out;
}

Var features(const ModelVars& vars, const std::vector<Var>& stream_params, const Var& x) {
  Var h = x;
  for (const Var& theta : stream_params) h = ad::elementwise(ad::dense_layer(h, theta), vars.activation);
  return h;
}

Var logits(const ModelVars& vars, const Var& f) { return ad::dense_layer(f, vars.head); }

}  // namespace resadapt
