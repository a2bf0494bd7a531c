#include <doctest.h>

#include "oracles.hpp"
#include "resadapt/errors.hpp"
#include "resadapt/matrixize.hpp"

using namespace resadapt;

namespace {

ConvKernel random_kernel(Eigen::Index o, Eigen::Index i, Eigen::Index x, Eigen::Index y, oracle::Rng& rng) {
  ConvKernel k(o, i, x, y);
  std::normal_distribution<double> normal;
  for (double& v : k.data) v = normal(rng);
  return k;
}

}  // namespace

TEST_SUITE("matrixize") {
  TEST_CASE("fc concatenates weights and bias") {
    oracle::Rng rng(1);
    const DenseMatrix w = oracle::gaussian(2, 3, rng);
    const DenseVector b = oracle::gaussian(2, 1, rng);
    const LayerParamMatrix m = fc_to_matrix(w, b);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 4);
    CHECK(m.kind == LayerKind::kFullyConnected);
    CHECK(m.theta.leftCols(3) == w);
    CHECK(m.theta.col(3) == b);
    CHECK(fc_to_matrix(DenseMatrix::Zero(2, 3), DenseVector::Zero(2)).theta == DenseMatrix::Zero(2, 4));
  }

  TEST_CASE("fc bias length mismatch") {
    CHECK_THROWS_AS(fc_to_matrix(DenseMatrix::Zero(2, 3), DenseVector::Zero(3)), ValidationError);
  }

  TEST_CASE("fc round trip is exact") {
    oracle::Rng rng(2);
    for (int k = 0; k < 10; ++k) {
      const DenseMatrix w = oracle::gaussian(1 + k % 4, 2 + k % 3, rng);
      const DenseVector b = oracle::gaussian(w.rows(), 1, rng);
      const FcParams back = matrix_to_fc(fc_to_matrix(w, b));
      CHECK(back.weights == w);
      REQUIRE(back.bias.has_value());
      CHECK(*back.bias == b);
    }
  }

  TEST_CASE("fc split of a 3x7 matrix") {
    oracle::Rng rng(3);
    LayerParamMatrix m = fc_to_matrix(oracle::gaussian(3, 6, rng), oracle::gaussian(3, 1, rng));
    const FcParams p = matrix_to_fc(m);
    CHECK(p.weights.rows() == 3);
    CHECK(p.weights.cols() == 6);
    CHECK(p.bias->size() == 3);
  }

  TEST_CASE("bias-less fc layer") {
    oracle::Rng rng(4);
    const DenseMatrix w = oracle::gaussian(3, 2, rng);
    const LayerParamMatrix m = fc_to_matrix(w);
    CHECK_FALSE(m.has_bias);
    CHECK(m.cols() == 2);
    CHECK(m.weight_cols() == 2);
    const FcParams back = matrix_to_fc(m);
    CHECK(back.weights == w);
    CHECK_FALSE(back.bias.has_value());
  }

  TEST_CASE("conv shape and flattening order") {
    oracle::Rng rng(5);
    const ConvKernel k = random_kernel(4, 3, 5, 5, rng);
    const DenseVector b = oracle::gaussian(4, 1, rng);
    const LayerParamMatrix m = conv_to_matrix(k, b);
    CHECK(m.rows() == 4);
    CHECK(m.cols() == 76);
    CHECK(m.kind == LayerKind::kConvolutional);
    for (Eigen::Index o = 0; o < 4; ++o) {
      Eigen::Index c = 0;
      for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index x = 0; x < 5; ++x) {
          for (Eigen::Index y = 0; y < 5; ++y) CHECK(m.theta(o, c++) == k(o, i, x, y));
        }
      }
      CHECK(m.theta(o, 75) == b(o));
    }
  }

  TEST_CASE("single-entry conv kernel") {
    ConvKernel k(1, 1, 1, 1);
    k(0, 0, 0, 0) = 2.5;
    DenseVector b(1);
    b << -1.0;
    const LayerParamMatrix m = conv_to_matrix(k, b);
    REQUIRE(m.cols() == 2);
    CHECK(m.theta(0, 0) == 2.5);
    CHECK(m.theta(0, 1) == -1.0);
  }

  TEST_CASE("conv round trip is exact") {
    oracle::Rng rng(6);
    for (int n = 0; n < 5; ++n) {
      const ConvKernel k = random_kernel(2 + n, 1 + n % 3, 3, 2, rng);
      const DenseVector b = oracle::gaussian(k.n_out, 1, rng);
      const ConvParams back = matrix_to_conv(conv_to_matrix(k, b));
      CHECK(back.kernel == k);
      CHECK(*back.bias == b);
      const ConvParams nb = matrix_to_conv(conv_to_matrix(k));
      CHECK(nb.kernel == k);
      CHECK_FALSE(nb.bias.has_value());
    }
  }

  TEST_CASE("conv bias length mismatch") {
    CHECK_THROWS_AS(conv_to_matrix(ConvKernel(2, 1, 3, 3), DenseVector::Zero(3)), ValidationError);
  }

  TEST_CASE("inconsistent metadata is rejected") {
    oracle::Rng rng(7);
    LayerParamMatrix m = fc_to_matrix(oracle::gaussian(3, 2, rng), oracle::gaussian(3, 1, rng));
    m.orig_shape = {3, 5};
    CHECK_THROWS_AS(matrix_to_fc(m), ValidationError);
    CHECK_THROWS_AS(validate(m), ValidationError);
    LayerParamMatrix c = conv_to_matrix(ConvKernel(2, 2, 2, 2), DenseVector::Zero(2));
    c.orig_shape = {2, 2, 3, 2};
    CHECK_THROWS_AS(matrix_to_conv(c), ValidationError);
    CHECK_THROWS_AS(matrix_to_conv(fc_to_matrix(DenseMatrix::Zero(2, 2))), ValidationError);
    CHECK_THROWS_AS(matrix_to_fc(conv_to_matrix(ConvKernel(2, 2, 2, 2))), ValidationError);
  }

  TEST_CASE("last column is the bias column") {
    oracle::Rng rng(8);
    const LayerParamMatrix m = fc_to_matrix(oracle::gaussian(4, 5, rng), oracle::gaussian(4, 1, rng));
    CHECK(m.weight_cols() == m.cols() - 1);
  }
}
