#ifndef RESADAPT_PROX_HPP_
#define RESADAPT_PROX_HPP_

// Group-Lasso regularizers on the rows and columns of the inner transform
// matrix T, their proximal operators and the least-squares recovery of the
// A1/A2 factors from a shrunk T.

#include <cmath>
#include <string_view>

#include "resadapt/errors.hpp"
#include "resadapt/types.hpp"

namespace resadapt {

/// Which count enters the sqrt weight of a group.
enum class GroupWeight {
  kLayerRows,  // N_i, the output units of the layer, for both rows and columns
  kGroupSize,  // number of entries in the group
};

GroupWeight parse_group_weight(std::string_view name);
std::string_view to_string(GroupWeight w);

struct ProxConfig {
  double lambda_r = 1.0;
  double step = 1e-3;  // t
  double gamma = 0.0;  // sparse-group mix, 0 = pure group Lasso
  double eps = 1e-4;
  GroupWeight weight = GroupWeight::kLayerRows;
};

void validate(const ProxConfig& cfg);

/// sqrt(n) * sum_c ||T_.c||_2
template <typename Derived>
double group_lasso_cols(const Eigen::MatrixBase<Derived>& t, double n) {
  if (t.size() == 0) return 0.0;
  return std::sqrt(n) * t.colwise().norm().sum();
}

/// sqrt(n) * sum_r ||T_r.||_2
template <typename Derived>
double group_lasso_rows(const Eigen::MatrixBase<Derived>& t, double n) {
  if (t.size() == 0) return 0.0;
  return std::sqrt(n) * t.rowwise().norm().sum();
}

/// sign(z) max(0, |z| - tau), entrywise.
template <typename Derived>
ad::Matrix<typename Derived::Scalar> soft_threshold(const Eigen::MatrixBase<Derived>& z, double tau) {
  using S = typename Derived::Scalar;
  if (!(tau >= 0.0)) throw ValidationError("soft threshold needs tau >= 0");
  return z.unaryExpr([tau](S v) -> S {
    if (std::abs(v) <= tau) return S(0);
    return v > S(0) ? v - S(tau) : v + S(tau);
  });
}

/// Scales every column by max(0, 1 - shrink / ||col||); columns at or below
/// the threshold become exactly zero.
template <typename Derived>
ad::Matrix<typename Derived::Scalar> block_soft_threshold_cols(
    const Eigen::MatrixBase<Derived>& t_hat, double shrink) {
  using S = typename Derived::Scalar;
  if (!(shrink >= 0.0)) throw ValidationError("block shrinkage needs shrink >= 0");
  ad::Matrix<S> out = t_hat;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const S norm = out.col(j).norm();
    if (norm <= S(shrink)) {
      out.col(j).setZero();
    } else {
      out.col(j) *= S(1) - S(shrink) / norm;
    }
  }
  return out;
}

template <typename Derived>
ad::Matrix<typename Derived::Scalar> block_soft_threshold_rows(
    const Eigen::MatrixBase<Derived>& t_hat, double shrink) {
  return block_soft_threshold_cols(t_hat.transpose(), shrink).transpose();
}

/// (1/2t) ||T - T_hat||^2 + lambda_r (R_c(T) + R_r(T)) for a single layer.
double prox_objective(const DenseMatrix& t, const DenseMatrix& t_hat, const ProxConfig& cfg,
                      Eigen::Index n_rows);

/// Regularizer R_c + R_r of a single layer under cfg's group weighting.
double group_lasso_penalty(const DenseMatrix& t, const ProxConfig& cfg, Eigen::Index n_rows);

/// Column shrink, then row shrink, each solving the (1/4t)-weighted
/// subproblem in closed form (shrink = 2 t lambda_r sqrt(N)).
DenseMatrix prox_two_step(const DenseMatrix& t_hat, const ProxConfig& cfg, Eigen::Index n_rows);

/// Per-row sparse-group shrinkage
///   beta = max(0, 1 - t(1-gamma)lambda sqrt(N) / ||S(b, t gamma lambda)||) S(b, t gamma lambda)
/// minimizing (1/2t)||beta - beta_hat||^2 + lambda sum_rows((1-gamma)sqrt(N)||row|| + gamma||row||_1).
DenseMatrix sparse_group_prox(const DenseMatrix& beta_hat, const ProxConfig& cfg, Eigen::Index n);

double sparse_group_objective(const DenseMatrix& beta, const DenseMatrix& beta_hat,
                              const ProxConfig& cfg, Eigen::Index n);

struct RecoveredFactors {
  DenseMatrix a1;
  DenseMatrix a2;
};

/// Two proximity-regularized least-squares solves, A1 first (with A2_hat),
/// then A2 (with the new A1):
///   A1 = argmin ||X - A1_hat||^2 + ||X^T S A2_hat - (T* - D)||^2
///   A2 = argmin ||X - A2_hat||^2 + ||A1^T S X - (T* - D)||^2
/// a2_mask, when given (C x r, 0/1), restricts A2 to its nonzero pattern.
RecoveredFactors ls_recover(const DenseMatrix& theta_s, const DenseMatrix& d_fixed,
                            const DenseMatrix& t_star, const DenseMatrix& a1_hat,
                            const DenseMatrix& a2_hat, const DenseMatrix* a2_mask = nullptr);

struct NormalEquationResiduals {
  double a1 = 0.0;  // max-norm of the A1 stationarity residual
  double a2 = 0.0;
};

/// Gradients (up to a factor 2) of the two recovery objectives at the
/// returned factors, restricted to free entries.
NormalEquationResiduals ls_normal_residuals(const DenseMatrix& theta_s, const DenseMatrix& d_fixed,
                                            const DenseMatrix& t_star, const DenseMatrix& a1_hat,
                                            const DenseMatrix& a2_hat, const RecoveredFactors& got,
                                            const DenseMatrix* a2_mask = nullptr);

}  // namespace resadapt

#endif  // RESADAPT_PROX_HPP_
