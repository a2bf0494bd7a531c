#ifndef RESADAPT_MATRIXIZE_HPP_
#define RESADAPT_MATRIXIZE_HPP_

// Flattening of layer parameters into the single matrix the residual
// transforms act on. Rows are output units; the last column holds the bias.
// Convolution kernels are flattened per output channel in
// (in-channel, row, col) order.

#include <optional>
#include <vector>

#include "resadapt/types.hpp"

namespace resadapt {

enum class LayerKind { kFullyConnected, kConvolutional };

/// Dense 4-d kernel, N_out x N_in x f_x x f_y, stored row-major in that order.
struct ConvKernel {
  Eigen::Index n_out = 0;
  Eigen::Index n_in = 0;
  Eigen::Index fx = 0;
  Eigen::Index fy = 0;
  std::vector<double> data;

  ConvKernel() = default;
  ConvKernel(Eigen::Index out, Eigen::Index in, Eigen::Index x, Eigen::Index y)
      : n_out(out), n_in(in), fx(x), fy(y), data(static_cast<std::size_t>(out * in * x * y), 0.0) {}

  double& operator()(Eigen::Index o, Eigen::Index i, Eigen::Index x, Eigen::Index y) {
    return data[static_cast<std::size_t>(((o * n_in + i) * fx + x) * fy + y)];
  }
  double operator()(Eigen::Index o, Eigen::Index i, Eigen::Index x, Eigen::Index y) const {
    return data[static_cast<std::size_t>(((o * n_in + i) * fx + x) * fy + y)];
  }
  bool operator==(const ConvKernel&) const = default;
};

struct LayerParamMatrix {
  DenseMatrix theta;
  LayerKind kind = LayerKind::kFullyConnected;
  /// fc: {out, in}; conv: {N_out, N_in, f_x, f_y}
  std::vector<Eigen::Index> orig_shape;
  bool has_bias = true;

  Eigen::Index rows() const { return theta.rows(); }
  Eigen::Index cols() const { return theta.cols(); }
  /// Number of leading weight columns; the bias column, if any, follows them.
  Eigen::Index weight_cols() const { return theta.cols() - (has_bias ? 1 : 0); }
};

struct FcParams {
  DenseMatrix weights;
  std::optional<DenseVector> bias;
};

struct ConvParams {
  ConvKernel kernel;
  std::optional<DenseVector> bias;
};

LayerParamMatrix fc_to_matrix(const DenseMatrix& weights, const DenseVector& bias);
LayerParamMatrix fc_to_matrix(const DenseMatrix& weights);

LayerParamMatrix conv_to_matrix(const ConvKernel& kernel, const DenseVector& bias);
LayerParamMatrix conv_to_matrix(const ConvKernel& kernel);

FcParams matrix_to_fc(const LayerParamMatrix& m);
ConvParams matrix_to_conv(const LayerParamMatrix& m);

/// Throws ValidationError unless kind, orig_shape and theta agree.
void validate(const LayerParamMatrix& m);

}  // namespace resadapt

#endif  // RESADAPT_MATRIXIZE_HPP_
