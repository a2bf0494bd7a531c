#include "resadapt/residual_transform.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <string>
#include <vector>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace {

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

DenseMatrix keep_columns(const DenseMatrix& m, const std::vector<Eigen::Index>& cols) {
  DenseMatrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

DenseMatrix keep_rows(const DenseMatrix& m, const std::vector<Eigen::Index>& rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

TransformParams make_transform(Eigen::Index n, Eigen::Index c, Eigen::Index l, Eigen::Index r,
                               Nonlinearity sigma, bool block_diagonal) {
  if (n < 0 || c < 0 || l < 0 || r < 0) throw ValidationError("transform dimensions must be >= 0");
  TransformParams t;
  t.a1 = DenseMatrix::Zero(n, l);
  t.b1 = DenseMatrix::Zero(n, l);
  t.a2 = DenseMatrix::Zero(c, r);
  t.b2 = DenseMatrix::Zero(c, r);
  t.d = DenseMatrix::Zero(l, r);
  t.sigma = sigma;
  if (block_diagonal && c >= 2) {
    t.block_partition = BlockPartition{c - 1, r >= 2 ? r - 1 : r};
  }
  return t;
}

DenseMatrix column_block_mask(const TransformParams& t) {
  DenseMatrix mask = DenseMatrix::Ones(t.c(), t.r());
  if (const auto& bp = t.block_partition) {
    mask.topRightCorner(bp->weight_rows, t.r() - bp->weight_rank).setZero();
    mask.bottomLeftCorner(t.c() - bp->weight_rows, bp->weight_rank).setZero();
  }
  return mask;
}

void validate(const TransformParams& t, Eigen::Index n, Eigen::Index c) {
  const Eigen::Index l = t.l();
  const Eigen::Index r = t.r();
  require(t.a1.rows() == n && t.b1.rows() == n && t.b1.cols() == l,
          "A1/B1 must be " + std::to_string(n) + "x" + std::to_string(l) + ", got " +
              shape(t.a1) + " and " + shape(t.b1));
  require(t.a2.rows() == c && t.b2.rows() == c && t.b2.cols() == r,
          "A2/B2 must be " + std::to_string(c) + "x" + std::to_string(r) + ", got " +
              shape(t.a2) + " and " + shape(t.b2));
  require(t.d.rows() == l && t.d.cols() == r,
          "D must be " + std::to_string(l) + "x" + std::to_string(r) + ", got " + shape(t.d));
  if (const auto& bp = t.block_partition) {
    if (bp->weight_rows < 0 || bp->weight_rows > c || bp->weight_rank < 0 || bp->weight_rank > r) {
      throw ValidationError("block partition outside the transform dimensions");
    }
    const DenseMatrix off = DenseMatrix::Ones(c, r) - column_block_mask(t);
    if (t.a2.cwiseProduct(off).squaredNorm() != 0.0 || t.b2.cwiseProduct(off).squaredNorm() != 0.0) {
      throw ValidationError("A2/B2 have entries outside the diagonal blocks");
    }
  }
}

DenseMatrix inner_transform(const DenseMatrix& theta_s, const TransformParams& t) {
  validate(t, theta_s.rows(), theta_s.cols());
  return t.a1.transpose() * theta_s * t.a2 + t.d;
}

DenseMatrix residual(const DenseMatrix& theta_s, const TransformParams& t) {
  const DenseMatrix inner = inner_transform(theta_s, t);
  return t.b1 * ad::apply_nonlinearity(t.sigma, inner) * t.b2.transpose();
}

DenseMatrix apply_transform(const DenseMatrix& theta_s, const TransformParams& t) {
  return residual(theta_s, t) + theta_s;
}

LayerParamMatrix apply_transform(const LayerParamMatrix& theta_s, const TransformParams& t) {
  LayerParamMatrix out = theta_s;
  out.theta = apply_transform(theta_s.theta, t);
  return out;
}

DenseVector apply_vector_transform(const DenseVector& theta_s, const VectorTransformParams& t) {
  const Eigen::Index m = theta_s.size();
  require(t.a.rows() == m && t.b.rows() == m && t.b.cols() == t.k() && t.d.size() == t.k(),
          "vector transform expects A, B of " + std::to_string(m) + "xk and d of length k");
  const DenseVector pre = t.a.transpose() * theta_s + t.d;
  return t.b * ad::apply_nonlinearity(t.sigma, pre) + theta_s;
}

VectorTransformParams to_vector_form(const TransformParams& t) {
  VectorTransformParams v;
  const DenseMatrix a2 = t.a2.cwiseProduct(column_block_mask(t));
  const DenseMatrix b2 = t.b2.cwiseProduct(column_block_mask(t));
  v.a = Eigen::kroneckerProduct(a2, t.a1).eval();
  v.b = Eigen::kroneckerProduct(b2, t.b1).eval();
  v.d = Eigen::Map<const DenseVector>(t.d.data(), t.d.size());
  v.sigma = t.sigma;
  return v;
}

std::int64_t param_count_matrix_form(std::int64_t n, std::int64_t c, std::int64_t l, std::int64_t r) {
  if (n < 0 || c < 0 || l < 0 || r < 0) throw ValidationError("parameter counts need nonnegative sizes");
  return 2 * (n * r + c * l) + r * l;
}

std::int64_t param_count_vector_form(std::int64_t n, std::int64_t c, std::int64_t k) {
  if (n < 0 || c < 0 || k < 0) throw ValidationError("parameter counts need nonnegative sizes");
  return (2 * n * c + 1) * k;
}

RankPair effective_ranks(const DenseMatrix& t_mat, double eps) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  RankPair ranks;
  if (t_mat.size() == 0) return ranks;
  ranks.l = (t_mat.rowwise().norm().array() > eps).count();
  ranks.r = (t_mat.colwise().norm().array() > eps).count();
  return ranks;
}

TransformParams prune(const TransformParams& t, const DenseMatrix& t_mat, double eps) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  require(t_mat.rows() == t.l() && t_mat.cols() == t.r(),
          "T must be " + std::to_string(t.l()) + "x" + std::to_string(t.r()) + ", got " + shape(t_mat));
  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < t_mat.rows(); ++i) {
    if (t_mat.row(i).norm() > eps) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < t_mat.cols(); ++j) {
    if (t_mat.col(j).norm() > eps) cols.push_back(j);
  }
  TransformParams out;
  out.sigma = t.sigma;
  out.a1 = keep_columns(t.a1, rows);
  out.b1 = keep_columns(t.b1, rows);
  out.a2 = keep_columns(t.a2, cols);
  out.b2 = keep_columns(t.b2, cols);
  out.d = keep_columns(keep_rows(t.d, rows), cols);
  if (const auto& bp = t.block_partition) {
    BlockPartition kept{bp->weight_rows, 0};
    for (Eigen::Index j : cols) {
      if (j < bp->weight_rank) ++kept.weight_rank;
    }
    out.block_partition = kept;
  }
  return out;
}

TransformVars bind(Tape& tape, const TransformParams& t, bool trainable) {
  auto put = [&](const DenseMatrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  TransformVars v;
  v.a1 = put(t.a1);
  v.a2 = put(t.a2);
  v.b1 = put(t.b1);
  v.b2 = put(t.b2);
  v.d = put(t.d);
  v.sigma = t.sigma;
  if (t.block_partition) v.mask = tape.constant(column_block_mask(t));
  return v;
}

namespace {

struct ColumnFactors {
  Var a2, b2;
};

ColumnFactors masked_column_factors(const TransformVars& t) {
  if (!t.mask) return {t.a2, t.b2};
  return {ad::hadamard(t.a2, *t.mask), ad::hadamard(t.b2, *t.mask)};
}

}  // namespace

Var inner_transform(const Var& theta_s, const TransformVars& t) {
  const auto [a2, b2] = masked_column_factors(t);
  return ad::transpose(t.a1) * theta_s * a2 + t.d;
}

Var residual(const Var& theta_s, const TransformVars& t) {
  const auto [a2, b2] = masked_column_factors(t);
  const Var inner = ad::transpose(t.a1) * theta_s * a2 + t.d;
  return t.b1 * ad::elementwise(inner, t.sigma) * ad::transpose(b2);
}

Var apply_transform(const Var& theta_s, const TransformVars& t) {
  return residual(theta_s, t) + theta_s;
}

}  // namespace resadapt
