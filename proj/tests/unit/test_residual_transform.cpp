#include <doctest.h>

#include "oracles.hpp"
#include "resadapt/errors.hpp"
#include "resadapt/finite_diff.hpp"
#include "resadapt/residual_transform.hpp"

using namespace resadapt;

namespace {

TransformParams random_transform(Eigen::Index n, Eigen::Index c, Eigen::Index l, Eigen::Index r,
                                 Nonlinearity sigma, bool block, oracle::Rng& rng) {
  TransformParams t = make_transform(n, c, l, r, sigma, block);
  const DenseMatrix mask = column_block_mask(t);
  t.a1 = oracle::gaussian(n, l, rng);
  t.b1 = oracle::gaussian(n, l, rng);
  t.a2 = oracle::gaussian(c, r, rng).cwiseProduct(mask);
  t.b2 = oracle::gaussian(c, r, rng).cwiseProduct(mask);
  t.d = oracle::gaussian(l, r, rng);
  return t;
}

oracle::Act to_oracle(Nonlinearity s) {
  switch (s) {
    case Nonlinearity::kRelu: return oracle::Act::kRelu;
    case Nonlinearity::kLeakyRelu: return oracle::Act::kLeakyRelu;
    case Nonlinearity::kTanh: return oracle::Act::kTanh;
    case Nonlinearity::kIdentity: break;
  }
  return oracle::Act::kIdentity;
}

}  // namespace

TEST_SUITE("residual-transform") {
  TEST_CASE("zero B1 and zero ranks reproduce the source exactly") {
    oracle::Rng rng(1);
    const DenseMatrix theta = oracle::gaussian(4, 5, rng);
    TransformParams t = random_transform(4, 5, 2, 3, Nonlinearity::kLeakyRelu, true, rng);
    t.b1.setZero();
    CHECK(apply_transform(theta, t) == theta);
    CHECK(apply_transform(theta, make_transform(4, 5, 0, 0, Nonlinearity::kTanh, false)) == theta);
    CHECK(apply_transform(theta, make_transform(4, 5, 3, 3, Nonlinearity::kLeakyRelu, true)) == theta);
  }

  TEST_CASE("matches the straight-line dense oracle") {
    oracle::Rng rng(2);
    for (Nonlinearity s : {Nonlinearity::kIdentity, Nonlinearity::kTanh, Nonlinearity::kLeakyRelu, Nonlinearity::kRelu}) {
      const DenseMatrix theta = oracle::gaussian(3, 4, rng);
      const TransformParams t = random_transform(3, 4, 2, 2, s, false, rng);
      const DenseMatrix want = oracle::transform(theta, t.a1, t.a2, t.b1, t.b2, t.d, to_oracle(s));
      CHECK((apply_transform(theta, t) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("differentiable form agrees with the dense form") {
    oracle::Rng rng(3);
    const DenseMatrix theta = oracle::gaussian(5, 4, rng);
    const TransformParams t = random_transform(5, 4, 3, 3, Nonlinearity::kLeakyRelu, true, rng);
    Tape tape;
    const Var out = apply_transform(tape.constant(theta), bind(tape, t, false));
    CHECK((out.value() - apply_transform(theta, t)).cwiseAbs().maxCoeff() < 1e-13);
  }

  TEST_CASE("gradients with respect to every factor") {
    oracle::Rng rng(4);
    const DenseMatrix theta = oracle::gaussian(4, 3, rng);
    const TransformParams t = random_transform(4, 3, 2, 2, Nonlinearity::kTanh, false, rng);
    const DenseMatrix w = oracle::gaussian(4, 3, rng);
    for (int which = 0; which < 6; ++which) {
      CAPTURE(which);
      const DenseMatrix at = which == 0 ? theta
                             : which == 1 ? t.a1
                             : which == 2 ? t.a2
                             : which == 3 ? t.b1
                             : which == 4 ? t.b2
                                          : t.d;
      auto fn = [&](ad::Tape<double>& tape, const ad::Var<double>& x) {
        TransformVars v = bind(tape, t, false);
        Var th = tape.constant(theta);
        if (which == 0) th = x;
        if (which == 1) v.a1 = x;
        if (which == 2) v.a2 = x;
        if (which == 3) v.b1 = x;
        if (which == 4) v.b2 = x;
        if (which == 5) v.d = x;
        return ad::sum(ad::hadamard(apply_transform(th, v), tape.constant(w)));
      };
      CHECK(ad::finite_diff_check<double>(fn, at, 1e-5) < 1e-4);
    }
  }

  TEST_CASE("shape mismatch") {
    oracle::Rng rng(5);
    const TransformParams t = random_transform(3, 4, 2, 2, Nonlinearity::kTanh, false, rng);
    CHECK_THROWS_AS(apply_transform(oracle::gaussian(4, 4, rng), t), DimensionError);
    TransformParams bad = t;
    bad.d = DenseMatrix::Zero(3, 2);
    CHECK_THROWS_AS(apply_transform(oracle::gaussian(3, 4, rng), bad), DimensionError);
  }

  TEST_CASE("vector form") {
    VectorTransformParams v;
    v.a = DenseMatrix::Constant(1, 1, 1.0);
    v.b = DenseMatrix::Constant(1, 1, 3.0);
    v.d = DenseVector::Constant(1, -2.0);
    v.sigma = Nonlinearity::kRelu;
    CHECK(apply_vector_transform(DenseVector::Constant(1, 2.0), v)(0) == 2.0);

    oracle::Rng rng(6);
    const DenseVector theta = oracle::gaussian(6, 1, rng);
    VectorTransformParams empty{DenseMatrix::Zero(6, 0), DenseMatrix::Zero(6, 0), DenseVector::Zero(0)};
    CHECK(apply_vector_transform(theta, empty) == theta);
    VectorTransformParams zero_b{oracle::gaussian(6, 2, rng), DenseMatrix::Zero(6, 2), oracle::gaussian(2, 1, rng)};
    CHECK(apply_vector_transform(theta, zero_b) == theta);
    CHECK_THROWS_AS(apply_vector_transform(oracle::gaussian(5, 1, rng), zero_b), DimensionError);
  }

  TEST_CASE("matrix and vector forms agree under identity sigma") {
    oracle::Rng rng(7);
    for (int k = 0; k < 5; ++k) {
      const DenseMatrix theta = oracle::gaussian(2, 3, rng);
      const TransformParams t = random_transform(2, 3, 2, 2, Nonlinearity::kIdentity, false, rng);
      // Kronecker embedding built entry by entry: (A2 (x) A1)_{(j,i),(q,p)} = A2_{jq} A1_{ip}.
      VectorTransformParams v;
      v.sigma = Nonlinearity::kIdentity;
      v.a = DenseMatrix(6, 4);
      v.b = DenseMatrix(6, 4);
      v.d = DenseVector(4);
      for (Eigen::Index j = 0; j < 3; ++j) {
        for (Eigen::Index i = 0; i < 2; ++i) {
          for (Eigen::Index q = 0; q < 2; ++q) {
            for (Eigen::Index p = 0; p < 2; ++p) {
              v.a(j * 2 + i, q * 2 + p) = t.a2(j, q) * t.a1(i, p);
              v.b(j * 2 + i, q * 2 + p) = t.b2(j, q) * t.b1(i, p);
            }
          }
        }
      }
      for (Eigen::Index q = 0; q < 2; ++q) {
        for (Eigen::Index p = 0; p < 2; ++p) v.d(q * 2 + p) = t.d(p, q);
      }
      const DenseVector vec_theta = Eigen::Map<const DenseVector>(theta.data(), 6);
      const DenseMatrix m = apply_transform(theta, t);
      const DenseVector got = apply_vector_transform(vec_theta, v);
      CHECK((Eigen::Map<const DenseVector>(m.data(), 6) - got).cwiseAbs().maxCoeff() < 1e-10);
      const VectorTransformParams lib = to_vector_form(t);
      CHECK((lib.a - v.a).cwiseAbs().maxCoeff() == 0.0);
      CHECK((lib.b - v.b).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("inner transform") {
    oracle::Rng rng(8);
    TransformParams t = make_transform(2, 2, 2, 2, Nonlinearity::kLeakyRelu, false);
    t.d = oracle::gaussian(2, 2, rng);
    const DenseMatrix theta = oracle::gaussian(2, 2, rng);
    CHECK(inner_transform(theta, t) == t.d);
    t.d.setZero();
    t.a1 = DenseMatrix::Identity(2, 2);
    t.a2 = DenseMatrix::Identity(2, 2);
    CHECK(inner_transform(theta, t) == theta);
    const TransformParams r = random_transform(5, 4, 3, 2, Nonlinearity::kLeakyRelu, false, rng);
    const DenseMatrix th = oracle::gaussian(5, 4, rng);
    CHECK((inner_transform(th, r) - oracle::inner(th, r.a1, r.a2, r.d)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("parameter counts") {
    CHECK(param_count_matrix_form(32, 33, 8, 8) == 1104);
    CHECK(param_count_matrix_form(7, 9, 0, 0) == 0);
    CHECK(param_count_matrix_form(1, 1, 1, 1) == 5);
    CHECK(param_count_vector_form(32, 33, 8) == 16904);
    CHECK(param_count_vector_form(32, 33, 0) == 0);
    CHECK(param_count_matrix_form(32, 32, 8, 8) < param_count_vector_form(32, 32, 8));
    CHECK_THROWS_AS(param_count_matrix_form(-1, 2, 1, 1), ValidationError);
  }

  TEST_CASE("matrix form is smaller on a grid") {
    for (std::int64_t n = 1; n <= 12; ++n) {
      for (std::int64_t c = 1; c <= 12; ++c) {
        for (std::int64_t k = 1; k <= 8; ++k) {
          if (k * (2 * (n + c) + k) < 2 * n * c) {
            CHECK(param_count_matrix_form(n, c, k, k) < param_count_vector_form(n, c, k));
          }
        }
      }
    }
  }

  TEST_CASE("allocated factor entries equal the count with l and r exchanged") {
    oracle::Rng rng(9);
    std::uniform_int_distribution<int> dim(1, 9);
    for (int k = 0; k < 20; ++k) {
      const int n = dim(rng), c = dim(rng), l = dim(rng), r = dim(rng);
      const TransformParams t = make_transform(n, c, l, r, Nonlinearity::kLeakyRelu, false);
      const std::int64_t entries = t.a1.size() + t.a2.size() + t.b1.size() + t.b2.size() + t.d.size();
      CHECK(entries == param_count_matrix_form(n, c, r, l));
    }
  }

  TEST_CASE("effective ranks") {
    CHECK(effective_ranks(DenseMatrix::Zero(3, 3), 1e-4) == RankPair{0, 0});
    DenseMatrix m(2, 2);
    m << 1, 1e-9, 0, 0;
    CHECK(effective_ranks(m, 1e-4) == RankPair{1, 1});
    CHECK(effective_ranks(DenseMatrix::Identity(3, 3), 1e-4) == RankPair{3, 3});
    CHECK_THROWS_AS(effective_ranks(m, 0.0), ValidationError);
  }

  TEST_CASE("pruning") {
    oracle::Rng rng(10);
    const DenseMatrix theta = oracle::gaussian(5, 4, rng);
    TransformParams t = random_transform(5, 4, 3, 3, Nonlinearity::kLeakyRelu, false, rng);

    const TransformParams all = prune(t, DenseMatrix::Zero(3, 3), 1e-4);
    CHECK(all.l() == 0);
    CHECK(all.r() == 0);
    CHECK(apply_transform(theta, all) == theta);

    const TransformParams same = prune(t, DenseMatrix::Ones(3, 3), 1e-4);
    CHECK(same.a1 == t.a1);
    CHECK(same.a2 == t.a2);
    CHECK(same.d == t.d);

    // Zero two columns of T by making A2 and D vanish there; sigma(0) = 0 keeps the output.
    t.a2.col(0).setZero();
    t.a2.col(2).setZero();
    t.d.col(0).setZero();
    t.d.col(2).setZero();
    const DenseMatrix tm = inner_transform(theta, t);
    const TransformParams p = prune(t, tm, 1e-4);
    CHECK(p.r() == 1);
    CHECK(p.l() == effective_ranks(tm, 1e-4).l);
    CHECK((apply_transform(theta, p) - apply_transform(theta, t)).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("pruning keeps the block partition consistent") {
    oracle::Rng rng(11);
    const DenseMatrix theta = oracle::gaussian(4, 5, rng);
    TransformParams t = random_transform(4, 5, 3, 3, Nonlinearity::kLeakyRelu, true, rng);
    REQUIRE(t.block_partition.has_value());
    DenseMatrix tm = inner_transform(theta, t);
    tm.col(0).setZero();
    const TransformParams p = prune(t, tm, 1e-4);
    CHECK(p.r() == 2);
    REQUIRE(p.block_partition.has_value());
    CHECK(p.block_partition->weight_rank == 1);
    CHECK_NOTHROW(validate(p, 4, 5));
  }

  TEST_CASE("block-diagonal mask isolates the bias column") {
    oracle::Rng rng(12);
    const DenseMatrix theta = oracle::gaussian(4, 5, rng);
    const TransformParams t = random_transform(4, 5, 3, 3, Nonlinearity::kIdentity, true, rng);
    const DenseMatrix mask = column_block_mask(t);
    CHECK(mask.bottomRows(1) == (DenseMatrix(1, 3) << 0, 0, 1).finished());
    CHECK(mask.topRows(4).col(2) == DenseVector::Zero(4));
    DenseMatrix perturbed = theta;
    perturbed.col(1).array() += 3.0;
    const DenseMatrix before = residual(theta, t);
    const DenseMatrix after = residual(perturbed, t);
    CHECK(before.col(4) == after.col(4));
    TransformParams bad = t;
    bad.a2(0, 2) = 1.0;
    CHECK_THROWS_AS(validate(bad, 4, 5), ValidationError);
  }
}
