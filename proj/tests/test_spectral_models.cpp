#include <gtest/gtest.h>

#include <random>

#include <cwhittle/spectral_model.hpp>

#include "oracles.hpp"

using namespace cwhittle;

namespace {

const std::vector<double> ar1_theta{1.0, 0.9};
const std::vector<double> exp_theta{10.0, 10.0};

}  // namespace

TEST(SpectralModels, PointValues) {
  EXPECT_NEAR(eval_sdf(*make_model("ar1"), ar1_theta, 0.0), 100.0, 1e-11);
  EXPECT_DOUBLE_EQ(eval_sdf(*make_model("expdecay"), exp_theta, 0.0), 10.0);
  const std::vector<double> sigma2{2.0};
  for (double w : {-0.5, -0.1, 0.0, 0.3, 0.5}) EXPECT_EQ(eval_sdf(*make_model("white"), sigma2, w), 2.0);
}

TEST(SpectralModels, OneSidedDerivativesAtKink) {
  const auto m = make_model("expdecay");
  EXPECT_NEAR(eval_sdf_deriv(*m, exp_theta, 0.0, 1, Side::right), -100.0, 1e-12);
  EXPECT_NEAR(eval_sdf_deriv(*m, exp_theta, 0.0, 1, Side::left), 100.0, 1e-12);
  EXPECT_NEAR(eval_sdf_deriv(*m, exp_theta, 0.0, 2, Side::right), 1000.0, 1e-10);
  EXPECT_NEAR(eval_sdf_deriv(*m, exp_theta, 0.0, 2, Side::left), 1000.0, 1e-10);
}

TEST(SpectralModels, WhiteNoiseDerivativesVanish) {
  const auto m = make_model("white");
  const std::vector<double> sigma2{3.0};
  for (int order = 1; order <= 5; ++order)
    for (double w : {-0.4, 0.0, 0.25}) EXPECT_EQ(eval_sdf_deriv(*m, sigma2, w, order, Side::right), 0.0);
}

TEST(SpectralModels, ThetaGradients) {
  const std::vector<double> sigma2{2.5};
  const auto g_white = eval_sdf_grad_theta(*make_model("white"), sigma2, 0.17);
  ASSERT_EQ(g_white.size(), 1u);
  EXPECT_EQ(g_white[0], 1.0);

  const auto g_exp = eval_sdf_grad_theta(*make_model("expdecay"), exp_theta, 0.0);
  EXPECT_DOUBLE_EQ(g_exp[0], 1.0);
  EXPECT_EQ(g_exp[1], 0.0);

  const auto g_ar = eval_sdf_grad_theta(*make_model("ar1"), ar1_theta, 0.5);
  EXPECT_NEAR(g_ar[0], 1.0 / (1.0 + 2.0 * 0.9 + 0.81), 1e-15);
}

TEST(SpectralModels, ValuesMatchDirectFormulas) {
  const auto ar = make_model("ar1");
  const auto ex = make_model("expdecay");
  for (double w = -0.5; w <= 0.5; w += 0.0625) {
    EXPECT_NEAR(eval_sdf(*ar, ar1_theta, w), oracle::ar1_sdf(1.0, 0.9, w), 1e-13 * oracle::ar1_sdf(1.0, 0.9, w));
    EXPECT_NEAR(eval_sdf(*ex, exp_theta, w), oracle::expdecay_sdf(10.0, 10.0, w), 1e-14 * 10.0);
  }
}

TEST(SpectralModelsProperty, OmegaDerivativesMatchRichardsonDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const std::string name : {"ar1", "expdecay"}) {
    const auto m = make_model(name);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> theta;
      if (name == "ar1")
        theta = {0.5 + 2.0 * u(rng), 0.1 + 0.8 * u(rng)};
      else
        theta = {0.5 + 10.0 * u(rng), 1.0 + 30.0 * u(rng)};
      const double w = -0.45 + 0.9 * u(rng);
      const Side side = w < 0.0 ? Side::left : Side::right;
      const int dir = w < 0.0 ? -1 : 1;
      const double analytic = eval_sdf_deriv(*m, theta, w, 1, side);
      auto f = [&](double x) { return m->value(theta, x, -1); };
      const double fd = oracle::one_sided_derivative(f, w, 1e-5, dir);
      const double exact = name == "ar1" ? oracle::ar1_sdf_slope(theta[0], theta[1], w)
                                         : oracle::expdecay_sdf_slope(theta[0], theta[1], w);
      const double scale = std::max(std::abs(exact), 1e-3 * std::abs(f(w)));
      EXPECT_LE(std::abs(analytic - exact), 1e-12 * scale) << name << " w=" << w;
      EXPECT_LE(std::abs(analytic - fd), 1e-6 * scale) << name << " w=" << w;
    }
  }
}

TEST(SpectralModelsProperty, ThetaPartialsMatchCentralDifferences) {
  for (const std::string name : {"ar1", "expdecay"}) {
    const auto m = make_model(name);
    const std::vector<double> theta = name == "ar1" ? ar1_theta : std::vector<double>{5.0, 35.0};
    for (double w : {-0.37, -0.01, 0.13, 0.29, 0.5}) {
      const auto g = eval_sdf_grad_theta(*m, theta, w);
      for (std::size_t j = 0; j < theta.size(); ++j) {
        auto f = [&](double x) {
          auto t = theta;
          t[j] = x;
          return m->value(t, w, -1);
        };
        const double fd = oracle::central_difference(f, theta[j], 1e-6 * std::abs(theta[j]));
        EXPECT_LE(std::abs(g[j] - fd), 1e-6 * std::abs(g[j])) << name << " j=" << j << " w=" << w;
      }
    }
  }
}

TEST(SpectralModelsProperty, SymmetricModelsAreEven) {
  for (const std::string name : {"ar1", "expdecay"}) {
    const auto m = make_model(name);
    const std::vector<double> theta = name == "ar1" ? ar1_theta : exp_theta;
    for (double w = 0.0; w <= 0.5; w += 0.01) {
      const double a = eval_sdf(*m, theta, w), b = eval_sdf(*m, theta, -w);
      EXPECT_LE(std::abs(a - b), 1e-15 * std::abs(a));
    }
  }
}

TEST(SpectralModels, ValidityBoxesAreEnforced) {
  const auto ar = make_model("ar1");
  const auto ex = make_model("expdecay");
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::numerical;
  };
  EXPECT_EQ(kind([&] { eval_sdf(*ar, std::vector<double>{1.0, 1.0}, 0.1); }), ErrorKind::parameter_domain);
  EXPECT_EQ(kind([&] { eval_sdf(*ar, std::vector<double>{-1.0, 0.5}, 0.1); }), ErrorKind::parameter_domain);
  EXPECT_EQ(kind([&] { eval_sdf(*ex, std::vector<double>{1.0, 0.0}, 0.1); }), ErrorKind::parameter_domain);
  EXPECT_EQ(kind([&] { eval_sdf(*ex, std::vector<double>{1.0}, 0.1); }), ErrorKind::parameter_domain);
  EXPECT_EQ(kind([&] { eval_sdf(*ex, exp_theta, 0.7); }), ErrorKind::domain);
  EXPECT_EQ(kind([&] { eval_sdf_deriv(*ex, exp_theta, 0.0, 1, Side::two_sided); }), ErrorKind::usage);
  EXPECT_EQ(kind([&] { eval_sdf_deriv(*ex, exp_theta, 0.1, 99, Side::right); }), ErrorKind::capability);
  EXPECT_EQ(kind([&] { make_model("arma"); }), ErrorKind::config);
}

TEST(SpectralModels, RoughPoints) {
  EXPECT_TRUE(make_model("ar1")->rough_points().empty());
  EXPECT_EQ(make_model("expdecay")->rough_points(), std::vector<double>{0.0});
  EXPECT_TRUE(make_model("white")->rough_points().empty());
}

TEST(CustomModel, FallbackDerivativesAreFlagged) {
  CustomModel::Definition d;
  d.name = "lorentz";
  d.param_count = 1;
  d.box = {ParamBound{0.0, std::numeric_limits<double>::infinity()}};
  d.value = [](std::span<const double> t, double w) { return t[0] / (1.0 + 25.0 * w * w); };
  d.reference_theta = {1.0};
  const CustomModel m(d);
  EXPECT_TRUE(m.reduced_accuracy());
  EXPECT_EQ(m.max_deriv_order(), 3);
  const std::vector<double> t{2.0};
  const double w = 0.2;
  const double exact = -2.0 * 50.0 * w / std::pow(1.0 + 25.0 * w * w, 2);
  EXPECT_NEAR(eval_sdf_deriv(m, t, w, 1, Side::right), exact, 1e-6 * std::abs(exact));
  EXPECT_NEAR(eval_sdf_grad_theta(m, t, w)[0], 1.0 / (1.0 + 25.0 * w * w), 1e-8);
}

TEST(CustomModel, RejectsNegativeDensities) {
  CustomModel::Definition d;
  d.param_count = 1;
  d.value = [](std::span<const double>, double w) { return w; };
  d.reference_theta = {1.0};
  EXPECT_THROW({ CustomModel m(d); }, Error);
}
