#ifndef RESADAPT_AUTODIFF_HPP_
#define RESADAPT_AUTODIFF_HPP_

// Reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape owns every node created during one forward evaluation. Var is a
// lightweight handle (tape pointer + node index). Ops are free functions that
// push a node holding the forward value and a closure that, given the
// upstream gradient, accumulates into the parents' gradients.
//
//   ad::Tape<double> tape;
//   auto w = tape.leaf(W);
//   auto loss = ad::frobenius_sq(w * tape.constant(X));
//   tape.backward(loss);
//   tape.grad(w);  // d loss / d W
//
// A tape supports a single backward pass; zero_grad() re-arms it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "resadapt/errors.hpp"

namespace resadapt::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Nonlinearity { kIdentity, kRelu, kTanh, kLeakyRelu };

inline constexpr double kLeakyReluSlope = 0.01;

inline Nonlinearity parse_nonlinearity(std::string_view tag) {
  if (tag == "identity") return Nonlinearity::kIdentity;
  if (tag == "relu") return Nonlinearity::kRelu;
  if (tag == "tanh") return Nonlinearity::kTanh;
  if (tag == "leaky-relu" || tag == "leaky_relu") return Nonlinearity::kLeakyRelu;
  throw ConfigurationError("unknown nonlinearity '" + std::string(tag) + "'");
}

inline std::string_view to_string(Nonlinearity fn) {
  switch (fn) {
    case Nonlinearity::kIdentity: return "identity";
    case Nonlinearity::kRelu: return "relu";
    case Nonlinearity::kTanh: return "tanh";
    case Nonlinearity::kLeakyRelu: return "leaky-relu";
  }
  throw ConfigurationError("invalid nonlinearity value");
}

template <typename Scalar>
Scalar activate(Nonlinearity fn, Scalar x) {
  switch (fn) {
    case Nonlinearity::kIdentity: return x;
    case Nonlinearity::kRelu: return x > Scalar(0) ? x : Scalar(0);
    case Nonlinearity::kTanh: return std::tanh(x);
    case Nonlinearity::kLeakyRelu: return x > Scalar(0) ? x : Scalar(kLeakyReluSlope) * x;
  }
  throw ConfigurationError("invalid nonlinearity value");
}

// Derivative at the kink (x = 0) is taken from the left branch.
template <typename Scalar>
Scalar activate_derivative(Nonlinearity fn, Scalar x) {
  switch (fn) {
    case Nonlinearity::kIdentity: return Scalar(1);
    case Nonlinearity::kRelu: return x > Scalar(0) ? Scalar(1) : Scalar(0);
    case Nonlinearity::kTanh: {
      const Scalar t = std::tanh(x);
      return Scalar(1) - t * t;
    }
    case Nonlinearity::kLeakyRelu: return x > Scalar(0) ? Scalar(1) : Scalar(kLeakyReluSlope);
  }
  throw ConfigurationError("invalid nonlinearity value");
}

/// Entrywise application on a dense matrix expression.
template <typename Derived>
Matrix<typename Derived::Scalar> apply_nonlinearity(Nonlinearity fn,
                                                    const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([fn](S v) { return activate(fn, v); });
}

template <typename Scalar>
class Tape;

template <typename Scalar>
class Var {
 public:
  Var() = default;

  const Matrix<Scalar>& value() const { return tape_->value(*this); }
  const Matrix<Scalar>& grad() const { return tape_->grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<Scalar>* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape<Scalar>;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, const Mat& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  /// Trainable input. Entries must be finite.
  Var<Scalar> leaf(Mat value) {
    if (!value.allFinite()) throw ValidationError("leaf value contains non-finite entries");
    return push(std::move(value), true, nullptr);
  }

  /// Input that receives no gradient.
  Var<Scalar> constant(Mat value) { return push(std::move(value), false, nullptr); }

  /// Generic op node: requires a gradient when any parent does.
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owned(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  const Mat& value(const Var<Scalar>& v) const {
    check_owned(v);
    return nodes_[v.id()].value;
  }

  const Mat& grad(const Var<Scalar>& v) const {
    check_owned(v);
    return nodes_[v.id()].grad;
  }

  bool requires_grad(const Var<Scalar>& v) const {
    check_owned(v);
    return nodes_[v.id()].requires_grad;
  }

  template <typename Derived>
  void accumulate(const Var<Scalar>& v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    n.grad += g;
  }

  /// Propagates d root / d node to every node reachable from root.
  void backward(const Var<Scalar>& root) {
    check_owned(root);
    if (backward_done_) throw UsageError("backward() called twice without zero_grad()");
    Node& r = nodes_[root.id()];
    if (r.value.rows() != 1 || r.value.cols() != 1) {
      throw UsageError("backward() requires a 1x1 root");
    }
    backward_done_ = true;
    r.grad.setConstant(Scalar(1));
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward) n.backward(*this, n.grad);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) n.grad.setZero();
    backward_done_ = false;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad;
    BackwardFn backward;
  };

  Var<Scalar> push(Mat value, bool requires_grad, BackwardFn fn) {
    Mat grad = Mat::Zero(value.rows(), value.cols());
    nodes_.push_back(Node{std::move(value), std::move(grad), requires_grad, std::move(fn)});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  void check_owned(const Var<Scalar>& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
      throw UsageError("variable does not belong to this tape");
    }
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

namespace detail {

template <typename Scalar>
Tape<Scalar>& common_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (!a.valid() || a.tape() != b.tape()) throw UsageError("operands live on different tapes");
  return *a.tape();
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::common_tape(a, b);
  detail::require_same_shape(a, b, "add");
  return tape.record(a.value() + b.value(), {a, b},
                     [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       t.accumulate(a, g);
                       t.accumulate(b, g);
                     });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::common_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  return tape.record(a.value() - b.value(), {a, b},
                     [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       t.accumulate(a, g);
                       t.accumulate(b, -g);
                     });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g * s);
  });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::common_tape(a, b);
  detail::require_same_shape(a, b, "hadamard");
  return tape.record(a.value().cwiseProduct(b.value()), {a, b},
                     [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       t.accumulate(a, g.cwiseProduct(b.value()));
                       t.accumulate(b, g.cwiseProduct(a.value()));
                     });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  return a.tape()->record(a.value().transpose(), {a},
                          [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                            t.accumulate(a, g.transpose());
                          });
}

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::common_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return tape.record(a.value() * b.value(), {a, b},
                     [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
                       if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
                     });
}

template <typename Scalar>
Var<Scalar> elementwise(const Var<Scalar>& a, Nonlinearity fn) {
  Matrix<Scalar> out = apply_nonlinearity(fn, a.value());
  return a.tape()->record(std::move(out), {a}, [a, fn](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(
                        [fn](Scalar v) { return activate_derivative(fn, v); })));
  });
}

/// Sum of squared entries, 1x1.
template <typename Scalar>
Var<Scalar> frobenius_sq(const Var<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape()->record(std::move(out), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, a.value() * (Scalar(2) * g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, Matrix<Scalar>::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

/// sum_j ||column j||_2, 1x1. A zero column contributes the zero subgradient.
template <typename Scalar>
Var<Scalar> column_norm_sum(const Var<Scalar>& a) {
  const Matrix<Scalar> norms = a.value().colwise().norm();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = norms.sum();
  return a.tape()->record(std::move(out), {a}, [a, norms](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(a.rows(), a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (norms(0, j) > Scalar(0)) d.col(j) = a.value().col(j) * (g(0, 0) / norms(0, j));
    }
    t.accumulate(a, d);
  });
}

/// sum_i ||row i||_2, 1x1.
template <typename Scalar>
Var<Scalar> row_norm_sum(const Var<Scalar>& a) {
  return column_norm_sum(transpose(a));
}

/// Entrywise natural log; every entry must be positive.
template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  if ((a.value().array() <= Scalar(0)).any()) throw ValidationError("log of non-positive value");
  return a.tape()->record(a.value().array().log().matrix(), {a},
                          [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                            t.accumulate(a, g.cwiseQuotient(a.value()));
                          });
}

/// Fully connected layer on row-major batches: x (B x in), theta (out x in[+1]).
/// With has_bias the last column of theta is the bias.
template <typename Scalar>
Var<Scalar> dense_layer(const Var<Scalar>& x, const Var<Scalar>& theta, bool has_bias = true) {
  auto& tape = detail::common_tape(x, theta);
  const Eigen::Index in = theta.cols() - (has_bias ? 1 : 0);
  if (x.cols() != in || in < 0) {
    throw DimensionError("dense_layer: input has " + std::to_string(x.cols()) +
                         " features, parameters expect " + std::to_string(in));
  }
  Matrix<Scalar> y = x.value() * theta.value().leftCols(in).transpose();
  if (has_bias) y.rowwise() += theta.value().col(in).transpose();
  return tape.record(std::move(y), {x, theta},
                     [x, theta, in, has_bias](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       if (t.requires_grad(x)) t.accumulate(x, g * theta.value().leftCols(in));
                       if (t.requires_grad(theta)) {
                         Matrix<Scalar> d(theta.rows(), theta.cols());
                         d.leftCols(in) = g.transpose() * x.value();
                         if (has_bias) d.col(in) = g.colwise().sum().transpose();
                         t.accumulate(theta, d);
                       }
                     });
}

/// Stacks a on top of b.
template <typename Scalar>
Var<Scalar> vstack(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::common_tape(a, b);
  if (a.cols() != b.cols()) throw DimensionError("vstack: column counts differ");
  Matrix<Scalar> out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  const Eigen::Index top = a.rows();
  return tape.record(std::move(out), {a, b},
                     [a, b, top](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                       t.accumulate(a, g.topRows(top));
                       t.accumulate(b, g.bottomRows(g.rows() - top));
                     });
}

template <typename Scalar>
Var<Scalar> select_rows(const Var<Scalar>& a, std::vector<Eigen::Index> rows) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw DimensionError("select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  return a.tape()->record(std::move(out), {a},
                          [a, rows = std::move(rows)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                            Matrix<Scalar> d = Matrix<Scalar>::Zero(a.rows(), a.cols());
                            for (std::size_t i = 0; i < rows.size(); ++i) {
                              d.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
                            }
                            t.accumulate(a, d);
                          });
}

/// Same value, no gradient flows back through it.
template <typename Scalar>
Var<Scalar> stop_gradient(const Var<Scalar>& a) {
  return a.tape()->constant(a.value());
}

/// Mean over rows of -log softmax(logits)[label]. labels holds one-hot rows.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, const Matrix<Scalar>& labels) {
  if (labels.rows() != logits.rows() || labels.cols() != logits.cols()) {
    throw DimensionError("softmax_cross_entropy: labels shape differs from logits");
  }
  if (logits.rows() == 0) throw ValidationError("softmax_cross_entropy: empty batch");
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    const bool binary = (labels.row(i).array() == Scalar(0) || labels.row(i).array() == Scalar(1)).all();
    if (!binary || labels.row(i).sum() != Scalar(1)) {
      throw ValidationError("softmax_cross_entropy: label row " + std::to_string(i) +
                            " is not one-hot");
    }
  }
  const Matrix<Scalar>& z = logits.value();
  const Eigen::Index n = z.rows();
  Matrix<Scalar> probs(z.rows(), z.cols());
  Scalar total(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mx = z.row(i).maxCoeff();
    const auto shifted = (z.row(i).array() - mx).eval();
    const Scalar denom = shifted.exp().sum();
    probs.row(i) = (shifted.exp() / denom).matrix();
    total += std::log(denom) - (labels.row(i).array() * shifted).sum();
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total / static_cast<Scalar>(n);
  return logits.tape()->record(
      std::move(out), {logits},
      [logits, labels, probs = std::move(probs), n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(logits, (probs - labels) * (g(0, 0) / static_cast<Scalar>(n)));
      });
}

inline constexpr double kProbabilityClip = 1e-12;

/// Mean binary cross-entropy of sigmoid(logits) against targets in [0, 1].
/// Probabilities are clipped to [clip, 1 - clip]; the gradient is zero where
/// clipping is active.
template <typename Scalar>
Var<Scalar> sigmoid_cross_entropy(const Var<Scalar>& logits, const Vector<Scalar>& targets,
                                  Scalar clip = Scalar(kProbabilityClip)) {
  if (logits.cols() != 1 || logits.rows() != targets.size()) {
    throw DimensionError("sigmoid_cross_entropy: expects N x 1 logits and N targets");
  }
  if (logits.rows() == 0) throw ValidationError("sigmoid_cross_entropy: empty batch");
  const Eigen::Index n = logits.rows();
  Vector<Scalar> dz(n);
  Scalar total(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar z = logits.value()(i, 0);
    const Scalar p = z >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-z))
                                    : std::exp(z) / (Scalar(1) + std::exp(z));
    const Scalar q = std::clamp(p, clip, Scalar(1) - clip);
    const Scalar y = targets(i);
    total -= y * std::log(q) + (Scalar(1) - y) * std::log(Scalar(1) - q);
    dz(i) = (p == q) ? (p - y) : Scalar(0);
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total / static_cast<Scalar>(n);
  return logits.tape()->record(
      std::move(out), {logits},
      [logits, dz = std::move(dz), n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        t.accumulate(logits, dz * (g(0, 0) / static_cast<Scalar>(n)));
      });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) { return add(a, b); }

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) { return sub(a, b); }

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) { return matmul(a, b); }

template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) { return scale(a, s); }

}  // namespace resadapt::ad

#endif  // RESADAPT_AUTODIFF_HPP_
