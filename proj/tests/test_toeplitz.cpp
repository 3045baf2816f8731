#include <gtest/gtest.h>

#include <chrono>

#include <cwhittle/acov.hpp>
#include <cwhittle/dft.hpp>
#include <cwhittle/toeplitz.hpp>
#include <cwhittle/whittle.hpp>

#include "oracles.hpp"

using namespace cwhittle;

TEST(FrequencyGrid, Layout) {
  const Eigen::VectorXd g4 = frequency_grid(4);
  EXPECT_EQ(std::vector<double>(g4.begin(), g4.end()), (std::vector<double>{-0.5, -0.25, 0.0, 0.25}));
  const Eigen::VectorXd g2 = frequency_grid(2);
  EXPECT_EQ(std::vector<double>(g2.begin(), g2.end()), (std::vector<double>{-0.5, 0.0}));
  const Eigen::VectorXd g5 = frequency_grid(5);
  const double expected[] = {-0.4, -0.2, 0.0, 0.2, 0.4};
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(g5[j], expected[j], 1e-16);
  EXPECT_THROW(frequency_grid(1), Error);
}

TEST(Dft, ImpulseHasFlatTransform) {
  const DftConvention F(4);
  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(4);
  e0[0] = 1.0;
  const Eigen::VectorXcd y = dft_apply(F, e0);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(y[j] - cplx(0.5, 0.0)), 0.0, 1e-16);
}

TEST(Dft, MatchesExplicitMatrix) {
  for (Eigen::Index n : {2, 5, 8, 31, 64, 100}) {
    const Eigen::VectorXcd x = oracle::complex_gaussian_vector(n, 11 + n);
    const Eigen::VectorXcd fast = dft_apply(DftConvention(n), x);
    const Eigen::VectorXcd slow = oracle::dft_matrix(n) * x;
    EXPECT_LE(oracle::rel_err(fast, slow), 1e-13) << "n=" << n;
  }
}

TEST(DftProperty, UnitaryAndInvertible) {
  for (Eigen::Index n : {7, 64, 1000, 4096}) {
    const DftConvention F(n);
    const Eigen::VectorXcd x = oracle::complex_gaussian_vector(n, 3 + n);
    const Eigen::VectorXcd y = dft_apply(F, x);
    EXPECT_LE(std::abs(y.norm() - x.norm()), 1e-13 * x.norm());
    EXPECT_LE(oracle::rel_err(dft_adjoint(F, y), x), 1e-13);
    // Parseval as required by the property suite.
    EXPECT_LE(std::abs(y.squaredNorm() - x.squaredNorm()), 1e-12 * x.squaredNorm());
  }
}

TEST(DftProperty, BlockTransformMatchesColumns) {
  const Eigen::Index n = 48;
  const DftConvention F(n);
  const Eigen::MatrixXcd X = oracle::complex_gaussian_matrix(n, 3, 5);
  const Eigen::MatrixXcd Y = F.apply(X);
  for (Eigen::Index c = 0; c < 3; ++c)
    EXPECT_LE(oracle::rel_err(Eigen::VectorXcd(Y.col(c)), F.apply(Eigen::VectorXcd(X.col(c)))), 1e-15);
  EXPECT_LE(oracle::rel_err(F.adjoint(Y), X), 1e-13);
}

TEST(Toeplitz, IdentityAndSmallCase) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(9);
  h[0] = 1.0;
  const Eigen::VectorXd v = oracle::gaussian_vector(9, 1);
  EXPECT_LE(oracle::rel_err(toeplitz_matvec(ToeplitzOperator(h), v), v), 1e-14);

  const Eigen::VectorXd out = toeplitz_matvec(ToeplitzOperator(Eigen::Vector3d(2, 1, 0)), Eigen::VectorXd(Eigen::Vector3d(1, 1, 1)));
  EXPECT_NEAR(out[0], 3.0, 1e-14);
  EXPECT_NEAR(out[1], 4.0, 1e-14);
  EXPECT_NEAR(out[2], 3.0, 1e-14);
}

TEST(Toeplitz, RandomMatchesDense) {
  const Eigen::Index n = 256;
  const Eigen::VectorXd h = oracle::gaussian_vector(n, 2);
  const ToeplitzOperator T(h);
  const Eigen::VectorXd v = oracle::gaussian_vector(n, 3);
  EXPECT_LE(oracle::rel_err(toeplitz_matvec(T, v), Eigen::VectorXd(oracle::toeplitz(h) * v)), 1e-13);
  const Eigen::VectorXcd z = oracle::complex_gaussian_vector(n, 4);
  EXPECT_LE(oracle::rel_err(toeplitz_matvec(T, z), Eigen::VectorXcd(oracle::toeplitz(h).cast<cplx>() * z)), 1e-13);
  EXPECT_EQ((T.dense() - oracle::toeplitz(h)).norm(), 0.0);
}

TEST(WhittleResidual, WhiteNoiseIsZero) {
  const Eigen::Index n = 64;
  const double s2 = 3.0;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  h[0] = s2;
  const Eigen::VectorXd D = Eigen::VectorXd::Constant(n, s2);
  const Eigen::VectorXcd v = oracle::complex_gaussian_vector(n, 9);
  EXPECT_LE(whittle_residual_matvec(ToeplitzOperator(h), D, v).norm(), 1e-13 * s2 * v.norm());
}

TEST(WhittleResidual, MatchesExplicitConjugation) {
  const Eigen::Index n = 128;
  const Eigen::VectorXd h = oracle::ar1_acov(1.0, 0.9, n);
  Eigen::VectorXd D(n);
  const Eigen::VectorXd w = oracle::grid(n);
  for (Eigen::Index j = 0; j < n; ++j) D[j] = oracle::ar1_sdf(1.0, 0.9, w[j]);
  const Eigen::MatrixXcd F = oracle::dft_matrix(n);
  Eigen::MatrixXcd E = F * oracle::toeplitz(h).cast<cplx>() * F.adjoint();
  E.diagonal() -= D.cast<cplx>();
  const ToeplitzOperator T(h);
  const Eigen::VectorXcd v = oracle::complex_gaussian_vector(n, 10);
  EXPECT_LE(oracle::rel_err(whittle_residual_matvec(T, D, v), Eigen::VectorXcd(E * v)), 1e-12);

  const Eigen::VectorXcd v2 = oracle::complex_gaussian_vector(n, 12);
  const Eigen::VectorXcd sum = whittle_residual_matvec(T, D, Eigen::VectorXcd(v + v2));
  const Eigen::VectorXcd parts = whittle_residual_matvec(T, D, v) + whittle_residual_matvec(T, D, v2);
  EXPECT_LE(oracle::rel_err(sum, parts), 1e-13);
}

TEST(WhittleResidualProperty, HermitianAction) {
  const Eigen::Index n = 300;
  const auto m = make_model("expdecay");
  const std::vector<double> theta{10.0, 10.0};
  const AcovTable h = acov_hybrid(*m, theta, n);
  const Eigen::VectorXd D = sdf_on_grid(*m, theta, n);
  const WhittleResidual E(ToeplitzOperator(h.values), D);
  for (int t = 0; t < 5; ++t) {
    const Eigen::VectorXcd u = oracle::complex_gaussian_vector(n, 100 + t);
    const Eigen::VectorXcd v = oracle::complex_gaussian_vector(n, 200 + t);
    const cplx a = u.dot(E.apply(v));
    const cplx b = std::conj(v.dot(E.apply(u)));
    EXPECT_LE(std::abs(a - b), 1e-12 * std::abs(a));
  }
}

TEST(ToeplitzProperty, MatvecScalesQuasilinearly) {
  std::vector<double> ratios;
  double prev = 0.0;
  for (int e = 14; e <= 17; ++e) {
    const Eigen::Index n = Eigen::Index{1} << e;
    const ToeplitzOperator T(oracle::ar1_acov(1.0, 0.9, n));
    const Eigen::VectorXcd v = oracle::complex_gaussian_vector(n, 1);
    T.apply(v);
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < 20; ++r) {
      const Eigen::VectorXcd out = T.apply(v);
      ASSERT_TRUE(std::isfinite(out[0].real()));
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (prev > 0.0) ratios.push_back(t / prev);
    prev = t;
  }
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(ratios.size());
  EXPECT_LE(mean, 2.6);
}
