#include <gtest/gtest.h>

#include <cwhittle/dplr_likelihood.hpp>
#include <cwhittle/simulate.hpp>

#include <map>
#include <sstream>

#include "oracles.hpp"

using namespace cwhittle;

namespace {

const std::vector<double> ar1_theta{1.0, 0.9};
const std::vector<double> exp_theta{10.0, 10.0};

Eigen::VectorXd cholesky_draw(const Eigen::VectorXd& h, std::uint64_t seed) {
  const Eigen::LLT<Eigen::MatrixXd> llt(oracle::toeplitz(h));
  return llt.matrixL() * oracle::gaussian_vector(h.size(), seed);
}

struct Case {
  std::string model;
  std::vector<double> theta;
  Eigen::VectorXd y;
  oracle::Likelihood dense;
};

// Data and dense reference values, computed once per configuration.
const Case& reference(const std::string& model, const std::vector<double>& theta, Eigen::Index n, bool derivs) {
  static std::map<std::string, Case> cache;
  std::ostringstream key;
  key << model << ':' << theta[0] << ':' << theta[1] << ':' << n << ':' << derivs;
  auto it = cache.find(key.str());
  if (it != cache.end()) return it->second;
  const Eigen::VectorXd h = oracle::closed_form_acov(model, theta, n);
  Case c{model, theta, cholesky_draw(h, 1234 + static_cast<std::uint64_t>(n)), {}};
  std::vector<Eigen::VectorXd> dh;
  if (derivs)
    for (int j = 0; j < 2; ++j) dh.push_back(oracle::closed_form_acov(model, theta, n, j));
  c.dense = oracle::dense_likelihood(h, dh, c.y);
  return cache.emplace(key.str(), std::move(c)).first->second;
}

double nll_rel_err(const std::string& model, const std::vector<double>& theta, Eigen::Index n, int r,
                   const AssemblyConfig& cfg = {}) {
  const Case& c = reference(model, theta, n, false);
  const auto opr = assemble_correction(*make_model(model), theta, n, r, cfg);
  return oracle::rel_err(nll(opr, c.y), c.dense.value);
}

double fisher_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> d(a - b), s(b);
  return d.singularValues()[0] / s.singularValues()[0];
}

}  // namespace

TEST(Assembly, WhiteNoiseHasNoCorrection) {
  for (int r : {0, 1, 8, 32}) {
    const auto opr = assemble_correction(*make_model("white"), std::vector<double>{1.3}, 256, r);
    EXPECT_EQ(opr.eig().rank(), 0) << "r=" << r;
  }
}

TEST(Assembly, RejectsBadRanks) {
  EXPECT_THROW(assemble_correction(*make_model("ar1"), ar1_theta, 16, 12), Error);
  EXPECT_THROW(assemble_correction(*make_model("ar1"), ar1_theta, 16, -1), Error);
}

TEST(Assembly, ResidualEstimateIsSmallOnceRankSuffices) {
  const auto opr = assemble_correction(*make_model("ar1"), ar1_theta, 512, 8);
  EXPECT_LE(correction_residual_estimate(opr), 1e-10);
}

TEST(DplrNll, Ar1RankTwoAtLength4096) { EXPECT_LE(nll_rel_err("ar1", ar1_theta, 4096, 2), 1e-13); }

TEST(DplrNll, ExpDecaySplitAtLength4096) { EXPECT_LE(nll_rel_err("expdecay", exp_theta, 4096, 128), 1e-12); }

TEST(DplrNllProperty, NoSplitPlateau) {
  AssemblyConfig cfg;
  cfg.quadrature.split_expansion = false;
  EXPECT_GE(nll_rel_err("expdecay", exp_theta, 4096, 128, cfg), 1e-9);
  EXPECT_LE(nll_rel_err("expdecay", exp_theta, 4096, 128), 1e-12);
}

TEST(DplrNllProperty, ErrorDecreasesWithRank) {
  double prev = HUGE_VAL;
  for (int r : {2, 32, 64, 128}) {
    const double err = nll_rel_err("expdecay", exp_theta, 2048, r);
    EXPECT_LE(err, 3.0 * prev) << "r=" << r;
    prev = err;
  }
}

TEST(DplrNll, WhiteNoiseIsHalfSquaredNorm) {
  const Eigen::VectorXd y = oracle::gaussian_vector(300, 4);
  const auto opr = assemble_correction(*make_model("white"), std::vector<double>{1.0}, 300, 4);
  EXPECT_NEAR(nll(opr, y), 0.5 * y.squaredNorm(), 1e-12 * y.squaredNorm());
}

TEST(DplrNll, Ar1RankTwoAtLength512) { EXPECT_LE(nll_rel_err("ar1", ar1_theta, 512, 2), 1e-13); }

TEST(DplrNll, RankZeroIsWhittle) {
  const auto m = make_model("expdecay");
  const Eigen::VectorXd y = reference("expdecay", exp_theta, 512, false).y;
  const double a = nll(assemble_correction(*m, exp_theta, 512, 0), y);
  EXPECT_LE(oracle::rel_err(a, whittle_nll(*m, exp_theta, y)), 1e-14);
}

TEST(DplrNll, RejectsWrongLength) {
  const auto opr = assemble_correction(*make_model("ar1"), ar1_theta, 64, 2);
  EXPECT_THROW(nll(opr, Eigen::VectorXd::Zero(63)), Error);
}

TEST(DplrGradient, WhiteNoiseClosedForm) {
  const double s2 = 1.7;
  const Eigen::VectorXd y = oracle::gaussian_vector(128, 5);
  const auto g = gradient(*make_model("white"), std::vector<double>{s2}, y, 128, 4);
  const double expected = 0.5 * (128 / s2 - y.squaredNorm() / (s2 * s2));
  EXPECT_NEAR(g.gradient[0], expected, 1e-12 * std::abs(expected) + 1e-12);
}

TEST(DplrGradient, Ar1MatchesDense) {
  const Case& c = reference("ar1", ar1_theta, 512, true);
  const auto g = gradient(*make_model("ar1"), ar1_theta, c.y, 512, 8);
  EXPECT_LE(oracle::max_rel_err(g.gradient, c.dense.gradient), 1e-10);
  EXPECT_LE(oracle::rel_err(g.value, c.dense.value), 1e-13);
}

TEST(DplrGradient, ExpDecayMatchesDense) {
  const Case& c = reference("expdecay", exp_theta, 512, true);
  const auto g = gradient(*make_model("expdecay"), exp_theta, c.y, 512, 128);
  EXPECT_LE(oracle::max_rel_err(g.gradient, c.dense.gradient), 1e-9);
}

TEST(DplrGradientProperty, MatchesFiniteDifferences) {
  for (const std::string name : {"ar1", "expdecay"}) {
    const auto m = make_model(name);
    const std::vector<double>& theta = name == "ar1" ? ar1_theta : exp_theta;
    const int r = name == "ar1" ? 8 : 128;
    const Eigen::VectorXd y = reference(name, theta, 512, false).y;
    const auto g = gradient(*m, theta, y, 512, r);
    for (std::size_t j = 0; j < 2; ++j) {
      auto f = [&](double x) {
        auto t = theta;
        t[j] = x;
        return nll(assemble_correction(*m, t, 512, r), y);
      };
      const double fd = oracle::central_difference(f, theta[j], 1e-6 * theta[j]);
      EXPECT_LE(std::abs(g.gradient[j] - fd), 1e-5 * std::abs(fd)) << name << " j=" << j;
    }
  }
}

TEST(DplrGradient, RecompressedTraceAgrees) {
  const Case& c = reference("ar1", ar1_theta, 512, true);
  AssemblyConfig cfg;
  cfg.trace = TraceMethod::recompress;
  const auto g = gradient(*make_model("ar1"), ar1_theta, c.y, 512, 8, cfg);
  EXPECT_LE(oracle::max_rel_err(g.gradient, c.dense.gradient), 1e-8);
}

TEST(DplrFisher, WhiteNoiseClosedForm) {
  const double s2 = 2.0;
  const auto I = fisher_exact(*make_model("white"), std::vector<double>{s2}, 256, 4);
  EXPECT_NEAR(I(0, 0), 256 / (2 * s2 * s2), 1e-12 * 256);
}

TEST(DplrFisher, Ar1MatchesDense) {
  const Case& c = reference("ar1", ar1_theta, 512, true);
  EXPECT_LE(fisher_rel_err(fisher_exact(*make_model("ar1"), ar1_theta, 512, 8), c.dense.fisher), 1e-9);
}

TEST(DplrFisherProperty, ExpDecayMatchesDenseAndIsPositiveDefinite) {
  const Case& c = reference("expdecay", exp_theta, 512, true);
  const Eigen::MatrixXd I = fisher_exact(*make_model("expdecay"), exp_theta, 512, 128);
  EXPECT_LE(fisher_rel_err(I, c.dense.fisher), 1e-9);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(I);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(DplrFisherStochastic, WhiteNoiseIsExact) {
  const double s2 = 3.0;
  for (int L : {1, 5}) {
    const auto I = fisher_stochastic(*make_model("white"), std::vector<double>{s2}, 200, 4, L, 9);
    EXPECT_NEAR(I(0, 0), 200 / (2 * s2 * s2), 1e-12 * 200);
  }
}

TEST(DplrFisherStochastic, ExpDecayWithin15Percent) {
  const auto m = make_model("expdecay");
  const Eigen::MatrixXd exact = fisher_exact(*m, exp_theta, 4096, 128);
  const Eigen::MatrixXd saa = fisher_stochastic(*m, exp_theta, 4096, 128, 72, 31);
  EXPECT_LE(fisher_rel_err(saa, exact), 0.15);
}

TEST(DplrFisherStochastic, OffDiagonalIsUnbiased) {
  const auto m = make_model("ar1");
  const Eigen::MatrixXd exact = fisher_exact(*m, ar1_theta, 1024, 8);
  std::vector<double> v;
  for (std::uint64_t s = 0; s < 50; ++s) v.push_back(fisher_stochastic(*m, ar1_theta, 1024, 8, 1, 500 + s)(0, 1));
  double mean = 0.0, var = 0.0;
  for (double x : v) mean += x;
  mean /= 50.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double se = std::sqrt(var / 49.0 / 50.0);
  EXPECT_LE(std::abs(mean - exact(0, 1)), 3.0 * se);
}

TEST(Whiten, WhiteNoiseHalvesTheTransform) {
  const Eigen::VectorXd y = oracle::gaussian_vector(64, 1);
  const auto opr = assemble_correction(*make_model("white"), std::vector<double>{4.0}, 64, 4);
  const Eigen::VectorXcd expected = oracle::dft_matrix(64) * y.cast<cplx>() / 2.0;
  EXPECT_LE(oracle::rel_err(whiten(opr, y), expected), 1e-13);
}

TEST(Whiten, FactorRoundTrip) {
  const auto opr = assemble_correction(*make_model("expdecay"), exp_theta, 512, 64);
  const Eigen::VectorXd y = oracle::gaussian_vector(512, 3);
  const Eigen::VectorXcd Fy = DftConvention(512).apply(Eigen::VectorXcd(y.cast<cplx>()));
  EXPECT_LE(oracle::rel_err(opr.factor().apply(whiten(opr, y)), Fy), 1e-10);
  const Eigen::VectorXcd z = oracle::complex_gaussian_vector(512, 4);
  EXPECT_LE(oracle::rel_err(opr.factor().solve(opr.factor().apply(z)), z), 1e-10);
}

TEST(Whiten, SimulatedSeriesHaveUnitVariance) {
  const Eigen::Index n = 4096;
  const auto m = make_model("ar1");
  const auto opr = assemble_correction(*m, ar1_theta, n, 4);
  const Eigen::VectorXd y = circulant_embedding_sample(opr.acov().values, n, 1, 77).col(0);
  const double v = whiten(opr, y).squaredNorm() / static_cast<double>(n);
  EXPECT_GE(v, 0.9);
  EXPECT_LE(v, 1.1);
}
