#include <gtest/gtest.h>

#include <cwhittle/dense_oracle.hpp>
#include <cwhittle/whittle.hpp>

#include "oracles.hpp"

using namespace cwhittle;

TEST(DenseCovariance, Fills) {
  EXPECT_EQ(dense::dense_covariance(Eigen::Vector2d(1, 0), 2), Eigen::Matrix2d::Identity());
  Eigen::Matrix3d expected;
  expected << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  EXPECT_EQ(dense::dense_covariance(Eigen::Vector3d(2, 1, 0), 3), expected);
  const Eigen::VectorXd h = oracle::ar1_acov(1.0, 0.9, 64);
  EXPECT_EQ(dense::dense_covariance(h, 64), oracle::toeplitz(h));
  EXPECT_THROW(dense::dense_covariance(Eigen::VectorXd::Ones(9000), 9000), Error);
}

TEST(DenseNll, ClosedForms) {
  const Eigen::VectorXd y = oracle::gaussian_vector(10, 1);
  EXPECT_NEAR(dense::dense_nll(Eigen::MatrixXd::Identity(10, 10), y), 0.5 * y.squaredNorm(), 1e-14);
  EXPECT_NEAR(dense::dense_nll(4.0 * Eigen::Matrix2d::Identity(), Eigen::Vector2d(2, 0)),
              0.5 * (2.0 * std::log(4.0) + 1.0), 1e-15);
  EXPECT_THROW(dense::dense_nll(-Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, 0)), Error);
}

TEST(DenseGradient, WhiteNoiseAnalytic) {
  const Eigen::Index n = 50;
  const double s2 = 2.5;
  const Eigen::VectorXd y = oracle::gaussian_vector(n, 2);
  const Eigen::MatrixXd S = s2 * Eigen::MatrixXd::Identity(n, n);
  const std::vector<Eigen::MatrixXd> dS{Eigen::MatrixXd::Identity(n, n)};
  const auto g = dense::dense_gradient(S, dS, y);
  EXPECT_NEAR(g.gradient[0], 0.5 * (n / s2 - y.squaredNorm() / (s2 * s2)), 1e-12);
  EXPECT_NEAR(dense::dense_fisher(S, dS)(0, 0), n / (2.0 * s2 * s2), 1e-12);
}

TEST(DenseGradient, MatchesFiniteDifferencesAndFisherIsSymmetric) {
  const Eigen::Index n = 200;
  const std::vector<double> theta{5.0, 35.0};
  auto cov = [&](const std::vector<double>& t, int c) {
    return dense::dense_covariance(oracle::expdecay_acov(t[0], t[1], n, c), n);
  };
  const Eigen::VectorXd y = cov(theta, -1).llt().matrixL() * oracle::gaussian_vector(n, 3);
  const std::vector<Eigen::MatrixXd> dS{cov(theta, 0), cov(theta, 1)};
  const auto g = dense::dense_gradient(cov(theta, -1), dS, y);
  // Roundoff level of the likelihood itself, from the log-determinant perturbation bound.
  const Eigen::MatrixXd S = cov(theta, -1);
  const double noise =
      64.0 * 2.220446049250313e-16 * S.operatorNorm() * S.llt().solve(Eigen::MatrixXd::Identity(n, n)).trace();
  for (std::size_t j = 0; j < 2; ++j) {
    auto f = [&](double x) {
      auto t = theta;
      t[j] = x;
      return dense::dense_nll(cov(t, -1), y);
    };
    const double step = 1e-5 * theta[j];
    const double fd = oracle::central_difference(f, theta[j], step);
    EXPECT_LE(std::abs(g.gradient[j] - fd), 1e-6 * std::abs(fd) + noise / step);
  }
  const Eigen::MatrixXd I = dense::dense_fisher(cov(theta, -1), dS);
  EXPECT_LE(std::abs(I(0, 1) - I(1, 0)), 1e-12 * I.norm());
}

TEST(DftCovQuadrature, WhiteNoiseOrthogonality) {
  const auto m = make_model("white");
  const std::vector<double> theta{1.7};
  EXPECT_NEAR(std::abs(dense::dft_cov_quadrature(*m, theta, 16, 5, 5) - cplx(1.7, 0.0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(dense::dft_cov_quadrature(*m, theta, 16, 5, 9)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(dense::dft_cov_quadrature(*m, theta, 16, 0, 15)), 0.0, 1e-12);
}

TEST(DftCovQuadratureProperty, MatchesExplicitConjugation) {
  const Eigen::Index n = 128;
  const auto m = make_model("ar1");
  const std::vector<double> theta{1.0, 0.9};
  const Eigen::MatrixXcd F = oracle::dft_matrix(n);
  const Eigen::MatrixXcd C = F * oracle::toeplitz(oracle::ar1_acov(1.0, 0.9, n)).cast<cplx>() * F.adjoint();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index kp = k; kp < n; ++kp) {
      const cplx q = dense::dft_cov_quadrature(*m, theta, n, k, kp);
      worst = std::max(worst, std::abs(q - C(k, kp)) / std::abs(C(k, k)));
    }
  EXPECT_LE(worst, 1e-8);
}

TEST(DftCovQuadratureProperty, ExpDecayEntriesMatch) {
  const Eigen::Index n = 64;
  const auto m = make_model("expdecay");
  const std::vector<double> theta{10.0, 10.0};
  const Eigen::MatrixXcd F = oracle::dft_matrix(n);
  const Eigen::MatrixXcd C = F * oracle::toeplitz(oracle::expdecay_acov(10.0, 10.0, n)).cast<cplx>() * F.adjoint();
  for (Eigen::Index k = 0; k < n; k += 7)
    for (Eigen::Index kp = 0; kp < n; kp += 5)
      EXPECT_LE(std::abs(dense::dft_cov_quadrature(*m, theta, n, k, kp) - C(k, kp)), 1e-8 * std::abs(C(k, k)));
}

TEST(DenseOracle, LibraryDftMatrixMatchesOracle) {
  EXPECT_LE((dense::dft_matrix(37) - oracle::dft_matrix(37)).norm(), 1e-13);
  EXPECT_LE((dense::dft_matrix(64) - oracle::dft_matrix(64)).norm(), 1e-13);
}

TEST(DenseOracleProperty, CorrectionRankIsSmall) {
  const Eigen::Index n = 1024;
  const Eigen::VectorXd w = oracle::grid(n);
  {
    Eigen::MatrixXcd E = dense::conjugated_covariance(oracle::toeplitz(oracle::ar1_acov(1.0, 0.9, n)));
    for (Eigen::Index j = 0; j < n; ++j) E(j, j) -= oracle::ar1_sdf(1.0, 0.9, w[j]);
    EXPECT_LE(dense::numerical_rank(E, 1e-12), 4);
  }
  {
    Eigen::MatrixXcd E = dense::conjugated_covariance(oracle::toeplitz(oracle::expdecay_acov(10.0, 10.0, n)));
    for (Eigen::Index j = 0; j < n; ++j) E(j, j) -= oracle::expdecay_sdf(10.0, 10.0, w[j]);
    EXPECT_LE(dense::numerical_rank(E, 1e-12), 140);
  }
}

TEST(DenseOracleProperty, ConjugationPreservesLogDeterminant) {
  const Eigen::Index n = 256;
  auto conjugated_logdet = [](const Eigen::MatrixXd& S) {
    const Eigen::MatrixXcd C = dense::conjugated_covariance(S);
    return 2.0 * C.llt().matrixLLT().diagonal().real().array().log().sum();
  };
  {
    const Eigen::MatrixXd S = oracle::toeplitz(oracle::ar1_acov(1.0, 0.9, n));
    EXPECT_LE(oracle::rel_err(conjugated_logdet(S), dense::logdet(dense::cholesky(S))), 1e-12);
  }
  {
    // First-order perturbation bound: |d logdet| <= ||E|| tr(S^-1) with ||E|| ~ eps ||S||.
    const Eigen::MatrixXd S = oracle::toeplitz(oracle::expdecay_acov(5.0, 35.0, n));
    const auto llt = dense::cholesky(S);
    const double trace_inv = llt.solve(Eigen::MatrixXd::Identity(n, n)).trace();
    const double bound = 64.0 * 2.220446049250313e-16 * S.operatorNorm() * trace_inv;
    EXPECT_LE(std::abs(conjugated_logdet(S) - dense::logdet(llt)), bound);
  }
}

TEST(Levinson, MatchesCholesky) {
  for (const std::string name : {"ar1", "expdecay"}) {
    const Eigen::Index n = 700;
    const std::vector<double> theta = name == "ar1" ? std::vector<double>{1.0, 0.9} : std::vector<double>{5.0, 35.0};
    const Eigen::VectorXd h = oracle::closed_form_acov(name, theta, n);
    const auto llt = dense::cholesky(oracle::toeplitz(h));
    const Eigen::VectorXd y = llt.matrixL() * oracle::gaussian_vector(n, 4);
    const dense::LevinsonToeplitz T(h);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(oracle::toeplitz(h)).eigenvalues();
    const double kappa_eps = 10.0 * ev.maxCoeff() / ev.minCoeff() * 2.220446049250313e-16;
    EXPECT_LE(oracle::rel_err(T.logdet(), dense::logdet(llt)), 1e-12);
    EXPECT_LE(oracle::rel_err(T.solve(y), Eigen::VectorXd(llt.solve(y))), std::max(1e-10, kappa_eps));
    std::vector<Eigen::VectorXd> dh{oracle::closed_form_acov(name, theta, n, 0),
                                    oracle::closed_form_acov(name, theta, n, 1)};
    const auto fast = dense::toeplitz_exact_gradient(h, dh, y);
    const auto slow = oracle::dense_likelihood(h, dh, y);
    EXPECT_LE(oracle::rel_err(fast.value, slow.value), 1e-12);
    EXPECT_LE(oracle::max_rel_err(fast.gradient, slow.gradient), std::max(1e-9, kappa_eps));
    EXPECT_LE(oracle::rel_err(dense::toeplitz_exact_nll(h, y), slow.value), 1e-12);
  }
}
