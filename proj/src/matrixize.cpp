#include "resadapt/matrixize.hpp"

#include <string>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace {

void check_bias(Eigen::Index rows, const DenseVector& bias) {
  if (bias.size() != rows) {
    throw ValidationError("bias length " + std::to_string(bias.size()) + " does not match " +
                          std::to_string(rows) + " output units");
  }
}

LayerParamMatrix from_fc(const DenseMatrix& w, const DenseVector* bias) {
  LayerParamMatrix m;
  m.kind = LayerKind::kFullyConnected;
  m.orig_shape = {w.rows(), w.cols()};
  m.has_bias = bias != nullptr;
  m.theta.resize(w.rows(), w.cols() + (bias ? 1 : 0));
  m.theta.leftCols(w.cols()) = w;
  if (bias) {
    check_bias(w.rows(), *bias);
    m.theta.col(w.cols()) = *bias;
  }
  return m;
}

LayerParamMatrix from_conv(const ConvKernel& k, const DenseVector* bias) {
  if (static_cast<Eigen::Index>(k.data.size()) != k.n_out * k.n_in * k.fx * k.fy) {
    throw ValidationError("kernel storage does not match its dimensions");
  }
  const Eigen::Index flat = k.n_in * k.fx * k.fy;
  LayerParamMatrix m;
  m.kind = LayerKind::kConvolutional;
  m.orig_shape = {k.n_out, k.n_in, k.fx, k.fy};
  m.has_bias = bias != nullptr;
  if (bias) check_bias(k.n_out, *bias);
  m.theta.resize(k.n_out, flat + (bias ? 1 : 0));
  // Row-major kernel storage already enumerates (in-channel, row, col) per output channel.
  for (Eigen::Index o = 0; o < k.n_out; ++o) {
    for (Eigen::Index c = 0; c < flat; ++c) m.theta(o, c) = k.data[static_cast<std::size_t>(o * flat + c)];
  }
  if (bias) m.theta.col(flat) = *bias;
  return m;
}

}  // namespace

LayerParamMatrix fc_to_matrix(const DenseMatrix& weights, const DenseVector& bias) {
  return from_fc(weights, &bias);
}

LayerParamMatrix fc_to_matrix(const DenseMatrix& weights) { return from_fc(weights, nullptr); }

LayerParamMatrix conv_to_matrix(const ConvKernel& kernel, const DenseVector& bias) {
  return from_conv(kernel, &bias);
}

LayerParamMatrix conv_to_matrix(const ConvKernel& kernel) { return from_conv(kernel, nullptr); }

void validate(const LayerParamMatrix& m) {
  const Eigen::Index extra = m.has_bias ? 1 : 0;
  switch (m.kind) {
    case LayerKind::kFullyConnected:
      if (m.orig_shape.size() != 2 || m.orig_shape[0] != m.theta.rows() ||
          m.orig_shape[1] + extra != m.theta.cols()) {
        throw ValidationError("fc shape metadata inconsistent with parameter matrix");
      }
      return;
    case LayerKind::kConvolutional:
      if (m.orig_shape.size() != 4 || m.orig_shape[0] != m.theta.rows() ||
          m.orig_shape[1] * m.orig_shape[2] * m.orig_shape[3] + extra != m.theta.cols()) {
        throw ValidationError("conv shape metadata inconsistent with parameter matrix");
      }
      return;
  }
  throw ValidationError("unknown layer kind");
}

FcParams matrix_to_fc(const LayerParamMatrix& m) {
  if (m.kind != LayerKind::kFullyConnected) throw ValidationError("not a fully connected layer");
  validate(m);
  FcParams p;
  p.weights = m.theta.leftCols(m.weight_cols());
  if (m.has_bias) p.bias = m.theta.col(m.weight_cols());
  return p;
}

ConvParams matrix_to_conv(const LayerParamMatrix& m) {
  if (m.kind != LayerKind::kConvolutional) throw ValidationError("not a convolutional layer");
  validate(m);
  ConvParams p;
  p.kernel = ConvKernel(m.orig_shape[0], m.orig_shape[1], m.orig_shape[2], m.orig_shape[3]);
  const Eigen::Index flat = m.weight_cols();
  for (Eigen::Index o = 0; o < p.kernel.n_out; ++o) {
    for (Eigen::Index c = 0; c < flat; ++c) p.kernel.data[static_cast<std::size_t>(o * flat + c)] = m.theta(o, c);
  }
  if (m.has_bias) p.bias = m.theta.col(flat);
  return p;
}

}  // namespace resadapt
