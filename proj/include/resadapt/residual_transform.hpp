#ifndef RESADAPT_RESIDUAL_TRANSFORM_HPP_
#define RESADAPT_RESIDUAL_TRANSFORM_HPP_

// Low-rank residual transforms generating target-stream parameters from
// source-stream parameters:
//
//   target = B1 * sigma(A1^T * source * A2 + D) * B2^T + source
//
// with source N x C, A1, B1 N x l, A2, B2 C x r and D l x r. l = r = 0 is the
// shared-parameter case. The reference vector form acts on vec(source):
//
//   target = B * sigma(A^T * source + d) + source

#include <cstdint>
#include <optional>

#include "resadapt/matrixize.hpp"
#include "resadapt/types.hpp"

namespace resadapt {

/// Splits the column side of the transform into a weight block and a bias
/// block. A2 and B2 are zero outside the two diagonal blocks: rows
/// [0, weight_rows) pair with columns [0, weight_rank), the remaining rows
/// (the bias column of the layer) with the remaining columns.
struct BlockPartition {
  Eigen::Index weight_rows = 0;
  Eigen::Index weight_rank = 0;

  bool operator==(const BlockPartition&) const = default;
};

struct TransformParams {
  DenseMatrix a1;  // N x l
  DenseMatrix a2;  // C x r
  DenseMatrix b1;  // N x l
  DenseMatrix b2;  // C x r
  DenseMatrix d;   // l x r
  Nonlinearity sigma = Nonlinearity::kLeakyRelu;
  std::optional<BlockPartition> block_partition;

  Eigen::Index l() const { return a1.cols(); }
  Eigen::Index r() const { return a2.cols(); }
  Eigen::Index n() const { return a1.rows(); }
  Eigen::Index c() const { return a2.rows(); }
};

struct VectorTransformParams {
  DenseMatrix a;  // M x k
  DenseMatrix b;  // M x k
  DenseVector d;  // k
  Nonlinearity sigma = Nonlinearity::kLeakyRelu;

  Eigen::Index k() const { return a.cols(); }
};

struct RankPair {
  Eigen::Index l = 0;
  Eigen::Index r = 0;

  bool operator==(const RankPair&) const = default;
};

/// Zero-filled transform for an N x C parameter matrix. With block_diagonal
/// the last of the C columns is treated as the bias column and receives a
/// rank-1 block (when r >= 2).
TransformParams make_transform(Eigen::Index n, Eigen::Index c, Eigen::Index l, Eigen::Index r,
                               Nonlinearity sigma, bool block_diagonal);

/// C x r matrix of ones on the allowed entries of A2/B2, zeros elsewhere.
DenseMatrix column_block_mask(const TransformParams& t);

/// Checks factor shapes against an N x C parameter matrix and the block structure.
void validate(const TransformParams& t, Eigen::Index n, Eigen::Index c);

DenseMatrix inner_transform(const DenseMatrix& theta_s, const TransformParams& t);
DenseMatrix residual(const DenseMatrix& theta_s, const TransformParams& t);
DenseMatrix apply_transform(const DenseMatrix& theta_s, const TransformParams& t);
LayerParamMatrix apply_transform(const LayerParamMatrix& theta_s, const TransformParams& t);

DenseVector apply_vector_transform(const DenseVector& theta_s, const VectorTransformParams& t);

/// Vector-form parameters that reproduce the matrix-form transform on
/// vec(source) (column-major): A = A2 (x) A1, B = B2 (x) B1, d = vec(D), k = l r.
VectorTransformParams to_vector_form(const TransformParams& t);

/// 2(N r + C l) + r l
std::int64_t param_count_matrix_form(std::int64_t n, std::int64_t c, std::int64_t l, std::int64_t r);
/// (2 N C + 1) k
std::int64_t param_count_vector_form(std::int64_t n, std::int64_t c, std::int64_t k);

/// Rows (l) and columns (r) of t_mat whose L2 norm exceeds eps.
RankPair effective_ranks(const DenseMatrix& t_mat, double eps);

/// Physically removes the rank components whose row (column) of t_mat has L2
/// norm <= eps: columns of A1/B1 and rows of D, resp. columns of A2/B2 and D.
TransformParams prune(const TransformParams& t, const DenseMatrix& t_mat, double eps);

/// Transform factors recorded on a tape.
struct TransformVars {
  Var a1, a2, b1, b2, d;
  std::optional<Var> mask;  // column block mask, constant
  Nonlinearity sigma = Nonlinearity::kLeakyRelu;
};

/// Records the factors as trainable leaves (or constants).
TransformVars bind(Tape& tape, const TransformParams& t, bool trainable = true);

Var inner_transform(const Var& theta_s, const TransformVars& t);
Var residual(const Var& theta_s, const TransformVars& t);
Var apply_transform(const Var& theta_s, const TransformVars& t);

}  // namespace resadapt

#endif  // RESADAPT_RESIDUAL_TRANSFORM_HPP_
