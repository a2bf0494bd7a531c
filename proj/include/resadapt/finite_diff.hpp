#ifndef RESADAPT_FINITE_DIFF_HPP_
#define RESADAPT_FINITE_DIFF_HPP_

#include <algorithm>
#include <cmath>
#include <utility>

#include "resadapt/autodiff.hpp"
#include "resadapt/errors.hpp"

namespace resadapt::ad {

/// Central-difference gradient of a scalar function of one matrix.
template <typename Scalar, typename ValueFn>
Matrix<Scalar> numerical_gradient(ValueFn&& value_at, const Matrix<Scalar>& at, Scalar step) {
  if (!(step > Scalar(0))) throw ValidationError("finite-difference step must be positive");
  Matrix<Scalar> g(at.rows(), at.cols());
  Matrix<Scalar> probe = at;
  for (Eigen::Index j = 0; j < at.cols(); ++j) {
    for (Eigen::Index i = 0; i < at.rows(); ++i) {
      const Scalar orig = probe(i, j);
      probe(i, j) = orig + step;
      const Scalar up = value_at(probe);
      probe(i, j) = orig - step;
      const Scalar down = value_at(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (Scalar(2) * step);
    }
  }
  return g;
}

/// max_ij |g_ad - g_fd| / max(1, |g_fd|)
template <typename Scalar>
Scalar gradient_error(const Matrix<Scalar>& analytic, const Matrix<Scalar>& numeric) {
  if (analytic.size() == 0) return Scalar(0);
  return ((analytic - numeric).array().abs() / numeric.array().abs().max(Scalar(1))).maxCoeff();
}

/// Compares backward() against central differences for fn: (Tape&, Var leaf) -> 1x1 Var.
/// Returns the max relative error over entries.
template <typename Scalar, typename Fn>
Scalar finite_diff_check(Fn&& fn, const Matrix<Scalar>& at, Scalar step) {
  if (!(step > Scalar(0))) throw ValidationError("finite-difference step must be positive");
  Matrix<Scalar> analytic;
  {
    Tape<Scalar> tape;
    auto x = tape.leaf(at);
    auto root = fn(tape, x);
    tape.backward(root);
    analytic = x.grad();
  }
  auto value_at = [&fn](const Matrix<Scalar>& p) {
    Tape<Scalar> tape;
    auto x = tape.leaf(p);
    return fn(tape, x).value()(0, 0);
  };
  return gradient_error<Scalar>(analytic, numerical_gradient<Scalar>(value_at, at, step));
}

}  // namespace resadapt::ad

#endif  // RESADAPT_FINITE_DIFF_HPP_
