#include "resadapt/prox.hpp"

#include <string>
#include <utility>
#include <vector>

namespace resadapt {

namespace {

double row_weight(const ProxConfig& cfg, Eigen::Index n_rows, const DenseMatrix& t) {
  return cfg.weight == GroupWeight::kLayerRows ? static_cast<double>(n_rows)
                                               : static_cast<double>(t.cols());
}

double col_weight(const ProxConfig& cfg, Eigen::Index n_rows, const DenseMatrix& t) {
  return cfg.weight == GroupWeight::kLayerRows ? static_cast<double>(n_rows)
                                               : static_cast<double>(t.rows());
}

std::vector<Eigen::Index> free_rows(const DenseMatrix* mask, Eigen::Index rows, Eigen::Index col) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!mask || (*mask)(i, col) != 0.0) out.push_back(i);
  }
  return out;
}

DenseMatrix gather_cols(const DenseMatrix& m, const std::vector<Eigen::Index>& idx) {
  DenseMatrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
  return out;
}

void check_shapes(const DenseMatrix& theta_s, const DenseMatrix& d, const DenseMatrix& t_star,
                  const DenseMatrix& a1_hat, const DenseMatrix& a2_hat, const DenseMatrix* mask) {
  const Eigen::Index l = a1_hat.cols();
  const Eigen::Index r = a2_hat.cols();
  if (a1_hat.rows() != theta_s.rows() || a2_hat.rows() != theta_s.cols() || d.rows() != l ||
      d.cols() != r || t_star.rows() != l || t_star.cols() != r) {
    throw DimensionError("ls_recover: factor shapes inconsistent with the parameter matrix");
  }
  if (mask && (mask->rows() != a2_hat.rows() || mask->cols() != r)) {
    throw DimensionError("ls_recover: mask shape differs from A2");
  }
}

}  // namespace

GroupWeight parse_group_weight(std::string_view name) {
  if (name == "layer-rows") return GroupWeight::kLayerRows;
  if (name == "group-size") return GroupWeight::kGroupSize;
  throw ConfigurationError("unknown group weight '" + std::string(name) + "'");
}

std::string_view to_string(GroupWeight w) {
  return w == GroupWeight::kLayerRows ? "layer-rows" : "group-size";
}

void validate(const ProxConfig& cfg) {
  if (!(cfg.lambda_r >= 0.0)) throw ConfigurationError("lambda_r must be >= 0");
  if (!(cfg.step > 0.0)) throw ConfigurationError("prox step t must be > 0");
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ConfigurationError("gamma must lie in [0, 1]");
  if (!(cfg.eps > 0.0)) throw ConfigurationError("eps must be > 0");
}

double group_lasso_penalty(const DenseMatrix& t, const ProxConfig& cfg, Eigen::Index n_rows) {
  return group_lasso_cols(t, col_weight(cfg, n_rows, t)) + group_lasso_rows(t, row_weight(cfg, n_rows, t));
}

double prox_objective(const DenseMatrix& t, const DenseMatrix& t_hat, const ProxConfig& cfg,
                      Eigen::Index n_rows) {
  return (t - t_hat).squaredNorm() / (2.0 * cfg.step) + cfg.lambda_r * group_lasso_penalty(t, cfg, n_rows);
}

DenseMatrix prox_two_step(const DenseMatrix& t_hat, const ProxConfig& cfg, Eigen::Index n_rows) {
  validate(cfg);
  // argmin (1/4t)||x - x_hat||^2 + lambda sqrt(N) ||x||  ==  block shrink by 2 t lambda sqrt(N)
  const double col_shrink = 2.0 * cfg.step * cfg.lambda_r * std::sqrt(col_weight(cfg, n_rows, t_hat));
  const double row_shrink = 2.0 * cfg.step * cfg.lambda_r * std::sqrt(row_weight(cfg, n_rows, t_hat));
  const DenseMatrix t_bar = block_soft_threshold_cols(t_hat, col_shrink);
  return block_soft_threshold_rows(t_bar, row_shrink);
}

DenseMatrix sparse_group_prox(const DenseMatrix& beta_hat, const ProxConfig& cfg, Eigen::Index n) {
  validate(cfg);
  const double tau = cfg.step * cfg.gamma * cfg.lambda_r;
  const double group = cfg.step * (1.0 - cfg.gamma) * cfg.lambda_r * std::sqrt(static_cast<double>(n));
  DenseMatrix out = soft_threshold(beta_hat, tau);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm <= group) {
      out.row(i).setZero();
    } else {
      out.row(i) *= 1.0 - group / norm;
    }
  }
  return out;
}

double sparse_group_objective(const DenseMatrix& beta, const DenseMatrix& beta_hat,
                              const ProxConfig& cfg, Eigen::Index n) {
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < beta.rows(); ++i) {
    penalty += (1.0 - cfg.gamma) * std::sqrt(static_cast<double>(n)) * beta.row(i).norm() +
               cfg.gamma * beta.row(i).lpNorm<1>();
  }
  return (beta - beta_hat).squaredNorm() / (2.0 * cfg.step) + cfg.lambda_r * penalty;
}

RecoveredFactors ls_recover(const DenseMatrix& theta_s, const DenseMatrix& d_fixed,
                            const DenseMatrix& t_star, const DenseMatrix& a1_hat,
                            const DenseMatrix& a2_hat, const DenseMatrix* a2_mask) {
  check_shapes(theta_s, d_fixed, t_star, a1_hat, a2_hat, a2_mask);
  const DenseMatrix target = t_star - d_fixed;  // l x r

  // (I + P P^T) A1 = A1_hat + P target^T, P = S A2_hat
  const DenseMatrix p = theta_s * a2_hat;
  DenseMatrix normal1 = p * p.transpose();
  normal1.diagonal().array() += 1.0;
  RecoveredFactors out;
  out.a1 = normal1.ldlt().solve(a1_hat + p * target.transpose());

  // Per column j of A2 over its free rows R: (I + M_R^T M_R) a = a_hat_R + M_R^T target_j
  const DenseMatrix m = out.a1.transpose() * theta_s;  // l x C
  out.a2 = DenseMatrix::Zero(a2_hat.rows(), a2_hat.cols());
  std::vector<std::pair<std::vector<Eigen::Index>, Eigen::LDLT<DenseMatrix>>> cache;
  for (Eigen::Index j = 0; j < a2_hat.cols(); ++j) {
    const auto rows = free_rows(a2_mask, a2_hat.rows(), j);
    if (rows.empty()) continue;
    const DenseMatrix m_r = gather_cols(m, rows);
    const Eigen::LDLT<DenseMatrix>* solver = nullptr;
    for (const auto& entry : cache) {
      if (entry.first == rows) solver = &entry.second;
    }
    if (!solver) {
      DenseMatrix normal2 = m_r.transpose() * m_r;
      normal2.diagonal().array() += 1.0;
      cache.emplace_back(rows, normal2.ldlt());
      solver = &cache.back().second;
    }
    DenseVector rhs(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) rhs(static_cast<Eigen::Index>(k)) = a2_hat(rows[k], j);
    rhs += m_r.transpose() * target.col(j);
    const DenseVector sol = solver->solve(rhs);
    for (std::size_t k = 0; k < rows.size(); ++k) out.a2(rows[k], j) = sol(static_cast<Eigen::Index>(k));
  }
  return out;
}

NormalEquationResiduals ls_normal_residuals(const DenseMatrix& theta_s, const DenseMatrix& d_fixed,
                                            const DenseMatrix& t_star, const DenseMatrix& a1_hat,
                                            const DenseMatrix& a2_hat, const RecoveredFactors& got,
                                            const DenseMatrix* a2_mask) {
  check_shapes(theta_s, d_fixed, t_star, a1_hat, a2_hat, a2_mask);
  const DenseMatrix target = t_star - d_fixed;
  NormalEquationResiduals res;
  // d/dX of the first objective: (X - A1_hat) + P (X^T P - target)^T
  const DenseMatrix p = theta_s * a2_hat;
  const DenseMatrix g1 = (got.a1 - a1_hat) + p * (got.a1.transpose() * p - target).transpose();
  res.a1 = g1.size() ? g1.cwiseAbs().maxCoeff() : 0.0;
  const DenseMatrix m = got.a1.transpose() * theta_s;
  DenseMatrix g2 = (got.a2 - a2_hat) + m.transpose() * (m * got.a2 - target);
  if (a2_mask) g2 = g2.cwiseProduct(*a2_mask);
  res.a2 = g2.size() ? g2.cwiseAbs().maxCoeff() : 0.0;
  return res;
}

}  // namespace resadapt
