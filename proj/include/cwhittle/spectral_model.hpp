#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace cwhittle {

enum class Side { left, right, two_sided };

// Open interval of admissible values for one parameter.
struct ParamBound {
  double lower = -HUGE_VAL;
  double upper = HUGE_VAL;
};

namespace jet {

inline double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// Leibniz rule: out[j] = sum_i C(j,i) a[i] b[j-i].
inline void multiply(const double* a, const double* b, int order, double* out) {
  std::vector<double> tmp(static_cast<std::size_t>(order) + 1, 0.0);
  for (int j = 0; j <= order; ++j) {
    double s = 0.0;
    for (int i = 0; i <= j; ++i) s += binomial(j, i) * a[i] * b[j - i];
    tmp[static_cast<std::size_t>(j)] = s;
  }
  std::copy(tmp.begin(), tmp.end(), out);
}

// Derivatives of 1/g from derivatives of g.
inline void reciprocal(const double* g, int order, double* out) {
  std::vector<double> f(static_cast<std::size_t>(order) + 1, 0.0);
  f[0] = 1.0 / g[0];
  for (int j = 1; j <= order; ++j) {
    double s = 0.0;
    for (int i = 0; i < j; ++i) s += binomial(j, i) * f[static_cast<std::size_t>(i)] * g[j - i];
    f[static_cast<std::size_t>(j)] = -s / g[0];
  }
  std::copy(f.begin(), f.end(), out);
}

}  // namespace jet

// A parametric spectral density S_theta(omega) on [-1/2, 1/2].
//
// `component` selects what is evaluated: a negative value means S itself,
// j >= 0 means the partial derivative dS/dtheta_j. Every component supports
// one-sided omega-derivatives up to max_deriv_order().
class SpectralModel {
 public:
  virtual ~SpectralModel() = default;

  virtual std::string name() const = 0;
  virtual int param_count() const = 0;
  virtual std::vector<ParamBound> validity_box() const = 0;
  virtual std::vector<double> rough_points() const { return {}; }
  virtual bool symmetric() const { return true; }
  virtual int max_deriv_order() const = 0;
  virtual bool reduced_accuracy() const { return false; }

  virtual double value(std::span<const double> theta, double omega, int component) const = 0;

  // Writes derivatives of orders 0..order at omega into out[0..order].
  virtual void derivatives(std::span<const double> theta, double omega, Side side, int component,
                           int order, double* out) const = 0;

  void check_params(std::span<const double> theta) const {
    if (static_cast<int>(theta.size()) != param_count()) {
      std::ostringstream os;
      os << name() << " expects " << param_count() << " parameters, got " << theta.size();
      fail(ErrorKind::parameter_domain, os.str());
    }
    const auto box = validity_box();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (!(theta[j] > box[j].lower && theta[j] < box[j].upper)) {
        std::ostringstream os;
        os << name() << ": parameter " << j << " = " << theta[j] << " outside (" << box[j].lower << ", "
           << box[j].upper << ")";
        fail(ErrorKind::parameter_domain, os.str());
      }
    }
  }

  bool is_rough_point(double omega) const {
    for (double x : rough_points())
      if (x == omega) return true;
    return false;
  }
};

// S(w) = theta1 / (1 - 2 theta2 cos(2 pi w) + theta2^2): spectrum of an AR(1) process.
class Ar1Model final : public SpectralModel {
 public:
  std::string name() const override { return "ar1"; }
  int param_count() const override { return 2; }
  std::vector<ParamBound> validity_box() const override { return {{0.0, HUGE_VAL}, {0.0, 1.0}}; }
  int max_deriv_order() const override { return 16; }

  double value(std::span<const double> theta, double omega, int component) const override {
    const double a = theta[0], phi = theta[1];
    const double c = std::cos(2.0 * std::numbers::pi * omega);
    const double g = 1.0 - 2.0 * phi * c + phi * phi;
    if (component < 0) return a / g;
    if (component == 0) return 1.0 / g;
    return -a * (2.0 * phi - 2.0 * c) / (g * g);
  }

  void derivatives(std::span<const double> theta, double omega, Side, int component, int order,
                   double* out) const override {
    const double a = theta[0], phi = theta[1];
    const double tau = 2.0 * std::numbers::pi;
    const auto m = static_cast<std::size_t>(order) + 1;
    std::vector<double> g(m), q(m), f(m);
    double scale = 1.0;
    for (int j = 0; j <= order; ++j) {
      const double cj = std::cos(tau * omega + j * std::numbers::pi / 2);
      if (j == 0) {
        g[0] = 1.0 + phi * phi - 2.0 * phi * cj;
        q[0] = 2.0 * phi - 2.0 * cj;
      } else {
        g[static_cast<std::size_t>(j)] = -2.0 * phi * scale * cj;
        q[static_cast<std::size_t>(j)] = -2.0 * scale * cj;
      }
      scale *= tau;
    }
    jet::reciprocal(g.data(), order, f.data());
    if (component < 0) {
      for (int j = 0; j <= order; ++j) out[j] = a * f[static_cast<std::size_t>(j)];
    } else if (component == 0) {
      std::copy(f.begin(), f.end(), out);
    } else {
      std::vector<double> f2(m);
      jet::multiply(f.data(), f.data(), order, f2.data());
      jet::multiply(q.data(), f2.data(), order, out);
      for (int j = 0; j <= order; ++j) out[j] *= -a;
    }
  }
};

// S(w) = theta1 exp(-theta2 |w|), with a kink at w = 0.
class ExpDecayModel final : public SpectralModel {
 public:
  std::string name() const override { return "expdecay"; }
  int param_count() const override { return 2; }
  std::vector<ParamBound> validity_box() const override { return {{0.0, HUGE_VAL}, {0.0, HUGE_VAL}}; }
  std::vector<double> rough_points() const override { return {0.0}; }
  int max_deriv_order() const override { return 16; }

  double value(std::span<const double> theta, double omega, int component) const override {
    const double e = std::exp(-theta[1] * std::abs(omega));
    if (component < 0) return theta[0] * e;
    if (component == 0) return e;
    return -theta[0] * std::abs(omega) * e;
  }

  void derivatives(std::span<const double> theta, double omega, Side side, int component, int order,
                   double* out) const override {
    const double a = theta[0], b = theta[1];
    const double s = omega > 0.0 ? 1.0 : (omega < 0.0 ? -1.0 : (side == Side::left ? -1.0 : 1.0));
    const auto m = static_cast<std::size_t>(order) + 1;
    std::vector<double> e(m);
    e[0] = std::exp(-b * std::abs(omega));
    for (std::size_t j = 1; j < m; ++j) e[j] = -b * s * e[j - 1];
    if (component < 0) {
      for (std::size_t j = 0; j < m; ++j) out[j] = a * e[j];
    } else if (component == 0) {
      std::copy(e.begin(), e.end(), out);
    } else {
      // d/dtheta2 = -theta1 (s w) e(w); the first factor is linear in w.
      const double c0 = -a * std::abs(omega), c1 = -a * s;
      for (std::size_t j = 0; j < m; ++j) out[j] = c0 * e[j] + (j > 0 ? static_cast<double>(j) * c1 * e[j - 1] : 0.0);
    }
  }
};

// Constant spectrum sigma^2.
class WhiteNoiseModel final : public SpectralModel {
 public:
  std::string name() const override { return "white"; }
  int param_count() const override { return 1; }
  std::vector<ParamBound> validity_box() const override { return {{0.0, HUGE_VAL}}; }
  int max_deriv_order() const override { return 16; }

  double value(std::span<const double> theta, double, int component) const override {
    return component < 0 ? theta[0] : 1.0;
  }

  void derivatives(std::span<const double> theta, double, Side, int component, int order,
                   double* out) const override {
    out[0] = component < 0 ? theta[0] : 1.0;
    for (int j = 1; j <= order; ++j) out[j] = 0.0;
  }
};

// Model assembled from user closures. Missing omega-derivatives fall back to
// Richardson-extrapolated one-sided differences (order <= 3, flagged as
// reduced accuracy); missing theta-partials use central differences.
class CustomModel final : public SpectralModel {
 public:
  using ValueFn = std::function<double(std::span<const double>, double)>;
  // Derivatives of S of orders 0..order at omega from the given side.
  using DerivFn = std::function<void(std::span<const double>, double, Side, int, double*)>;
  using PartialFn = std::function<double(std::span<const double>, double, int)>;

  struct Definition {
    std::string name = "custom";
    int param_count = 0;
    std::vector<ParamBound> box;
    std::vector<double> rough_points;
    bool symmetric = true;
    ValueFn value;
    DerivFn derivatives;
    int derivative_order = 0;
    PartialFn partial;
    std::vector<double> reference_theta;
  };

  explicit CustomModel(Definition def) : def_(std::move(def)) {
    if (!def_.value) fail(ErrorKind::usage, "custom model needs a value function");
    if (static_cast<int>(def_.box.size()) != def_.param_count)
      def_.box.assign(static_cast<std::size_t>(def_.param_count), ParamBound{});
    for (std::size_t i = 0; i < def_.rough_points.size(); ++i) {
      const double x = def_.rough_points[i];
      if (!(x > -0.5 && x < 0.5)) fail(ErrorKind::usage, "rough points must lie inside (-1/2, 1/2)");
      if (i > 0 && !(x > def_.rough_points[i - 1]))
        fail(ErrorKind::usage, "rough points must be strictly increasing");
    }
    if (def_.symmetric) {
      for (double x : def_.rough_points) {
        if (x != 0.0 && std::find(def_.rough_points.begin(), def_.rough_points.end(), -x) == def_.rough_points.end())
          fail(ErrorKind::usage, "symmetric model needs rough points mirrored about 0");
      }
    }
    if (!def_.reference_theta.empty()) {
      check_params(def_.reference_theta);
      for (int i = 0; i < 1000; ++i) {
        const double w = -0.5 + i / 999.0;
        const double s = def_.value(def_.reference_theta, w);
        if (!(s >= 0.0)) fail(ErrorKind::model_validity, "custom model is negative or NaN on the check grid");
      }
    }
  }

  std::string name() const override { return def_.name; }
  int param_count() const override { return def_.param_count; }
  std::vector<ParamBound> validity_box() const override { return def_.box; }
  std::vector<double> rough_points() const override { return def_.rough_points; }
  bool symmetric() const override { return def_.symmetric; }
  int max_deriv_order() const override { return def_.derivatives ? def_.derivative_order : 3; }
  bool reduced_accuracy() const override { return !def_.derivatives; }

  double value(std::span<const double> theta, double omega, int component) const override {
    if (component < 0) return def_.value(theta, omega);
    if (def_.partial) return def_.partial(theta, omega, component);
    return theta_difference(theta, component, [&](std::span<const double> t) { return def_.value(t, omega); });
  }

  void derivatives(std::span<const double> theta, double omega, Side side, int component, int order,
                   double* out) const override {
    auto base = [&](std::span<const double> t, double* o) {
      if (def_.derivatives) {
        def_.derivatives(t, omega, side, order, o);
      } else {
        o[0] = def_.value(t, omega);
        for (int j = 1; j <= order; ++j) o[j] = one_sided_difference(t, omega, side, j);
      }
    };
    if (component < 0) {
      base(theta, out);
      return;
    }
    const auto m = static_cast<std::size_t>(order) + 1;
    std::vector<double> t(theta.begin(), theta.end()), plus(m), minus(m);
    const auto j = static_cast<std::size_t>(component);
    const double h = 1e-6 * std::max(std::abs(theta[j]), 1e-3);
    t[j] = theta[j] + h;
    base(t, plus.data());
    t[j] = theta[j] - h;
    base(t, minus.data());
    for (std::size_t i = 0; i < m; ++i) out[i] = (plus[i] - minus[i]) / (2.0 * h);
  }

 private:
  template <class F>
  static double theta_difference(std::span<const double> theta, int component, F&& f) {
    std::vector<double> t(theta.begin(), theta.end());
    const auto j = static_cast<std::size_t>(component);
    const double h = 1e-6 * std::max(std::abs(theta[j]), 1e-3);
    t[j] = theta[j] + h;
    const double up = f(t);
    t[j] = theta[j] - h;
    const double down = f(t);
    return (up - down) / (2.0 * h);
  }

  double one_sided_difference(std::span<const double> theta, double omega, Side side, int order) const {
    const double s = side == Side::left ? -1.0 : 1.0;
    auto forward = [&](double h) {
      double acc = 0.0;
      for (int i = 0; i <= order; ++i) {
        const double sign = ((order - i) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * jet::binomial(order, i) * def_.value(theta, omega + s * i * h);
      }
      return acc / std::pow(s * h, order);
    };
    constexpr int levels = 4;
    double table[levels];
    double h = 0.02;
    for (int i = 0; i < levels; ++i, h /= 2) table[i] = forward(h);
    for (int k = 1; k < levels; ++k) {
      const double f = std::ldexp(1.0, k);
      for (int i = levels - 1; i >= k; --i) table[i] = (f * table[i] - table[i - 1]) / (f - 1.0);
    }
    return table[levels - 1];
  }

  Definition def_;
};

inline std::shared_ptr<const SpectralModel> make_model(const std::string& name) {
  if (name == "ar1") return std::make_shared<Ar1Model>();
  if (name == "expdecay") return std::make_shared<ExpDecayModel>();
  if (name == "white") return std::make_shared<WhiteNoiseModel>();
  fail(ErrorKind::config, "unknown model '" + name + "' (expected ar1, expdecay or white)");
}

inline void check_frequency(double omega) {
  if (!(omega >= -0.5 && omega <= 0.5)) fail(ErrorKind::domain, "frequency outside [-1/2, 1/2]");
}

inline double eval_sdf(const SpectralModel& model, std::span<const double> theta, double omega) {
  model.check_params(theta);
  check_frequency(omega);
  return model.value(theta, omega, -1);
}

inline double eval_component_deriv(const SpectralModel& model, std::span<const double> theta, double omega,
                                   int component, int order, Side side) {
  model.check_params(theta);
  check_frequency(omega);
  if (order < 0 || order > model.max_deriv_order())
    fail(ErrorKind::capability, model.name() + ": derivative order " + std::to_string(order) + " not available");
  if (order > 0 && side == Side::two_sided && (model.is_rough_point(omega) || std::abs(omega) == 0.5))
    fail(ErrorKind::usage, "two-sided derivative requested at a rough point or endpoint");
  std::vector<double> out(static_cast<std::size_t>(order) + 1);
  model.derivatives(theta, omega, side == Side::two_sided ? Side::right : side, component, order, out.data());
  return out.back();
}

inline double eval_sdf_deriv(const SpectralModel& model, std::span<const double> theta, double omega, int order,
                             Side side) {
  return eval_component_deriv(model, theta, omega, -1, order, side);
}

inline std::vector<double> eval_sdf_grad_theta(const SpectralModel& model, std::span<const double> theta,
                                               double omega) {
  model.check_params(theta);
  check_frequency(omega);
  std::vector<double> g(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) g[j] = model.value(theta, omega, static_cast<int>(j));
  return g;
}

// S_theta or one of its theta-partials, bound to a parameter vector. This is
// the integrand type consumed by the autocovariance engine.
class SpectralComponent {
 public:
  SpectralComponent(const SpectralModel& model, std::vector<double> theta, int component = -1)
      : model_(&model), theta_(std::move(theta)), component_(component), rough_(model.rough_points()) {
    model.check_params(theta_);
    if (component >= model.param_count()) fail(ErrorKind::usage, "component index out of range");
  }

  double value(double omega) const { return model_->value(theta_, omega, component_); }

  void derivatives(double omega, Side side, int order, double* out) const {
    model_->derivatives(theta_, omega, side, component_, order, out);
  }

  const std::vector<double>& rough_points() const { return rough_; }
  bool symmetric() const { return model_->symmetric(); }
  int max_deriv_order() const { return model_->max_deriv_order(); }
  bool nonnegative() const { return component_ < 0; }
  int component() const { return component_; }
  const SpectralModel& model() const { return *model_; }
  const std::vector<double>& theta() const { return theta_; }

 private:
  const SpectralModel* model_;
  std::vector<double> theta_;
  int component_;
  std::vector<double> rough_;
};

}  // namespace cwhittle
