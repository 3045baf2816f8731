#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acov.hpp"
#include "dense_oracle.hpp"
#include "dplr_likelihood.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "simulate.hpp"
#include "spectral_model.hpp"
#include "whittle.hpp"

namespace cwhittle {

enum class FitMethod { dplr, whittle, debiased, dense };

inline const char* to_string(FitMethod m) {
  switch (m) {
    case FitMethod::dplr: return "dplr";
    case FitMethod::whittle: return "whittle";
    case FitMethod::debiased: return "debiased";
    case FitMethod::dense: return "dense";
  }
  return "unknown";
}

inline FitMethod parse_fit_method(const std::string& s) {
  if (s == "dplr") return FitMethod::dplr;
  if (s == "whittle") return FitMethod::whittle;
  if (s == "debiased") return FitMethod::debiased;
  if (s == "dense") return FitMethod::dense;
  fail(ErrorKind::usage, "unknown method '" + s + "' (expected dplr, whittle, debiased or dense)");
}

// Maps each bounded parameter to an unconstrained coordinate: log for
// half-lines, logit for finite intervals.
class ParamTransform {
 public:
  explicit ParamTransform(std::vector<ParamBound> box) : box_(std::move(box)) {}

  Eigen::VectorXd to_free(std::span<const double> theta) const {
    Eigen::VectorXd phi(static_cast<Eigen::Index>(theta.size()));
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const auto& b = box_[j];
      const double t = theta[j];
      double v;
      if (std::isfinite(b.lower) && std::isfinite(b.upper)) {
        const double u = (t - b.lower) / (b.upper - b.lower);
        v = std::log(u / (1.0 - u));
      } else if (std::isfinite(b.lower)) {
        v = std::log(t - b.lower);
      } else if (std::isfinite(b.upper)) {
        v = std::log(b.upper - t);
      } else {
        v = t;
      }
      phi[static_cast<Eigen::Index>(j)] = v;
    }
    return phi;
  }

  std::vector<double> to_theta(const Eigen::VectorXd& phi) const {
    std::vector<double> theta(static_cast<std::size_t>(phi.size()));
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] = map(j, phi[static_cast<Eigen::Index>(j)]).first;
    return theta;
  }

  // d theta_j / d phi_j.
  Eigen::VectorXd jacobian(const Eigen::VectorXd& phi) const {
    Eigen::VectorXd d(phi.size());
    for (Eigen::Index j = 0; j < phi.size(); ++j) d[j] = map(static_cast<std::size_t>(j), phi[j]).second;
    return d;
  }

 private:
  std::pair<double, double> map(std::size_t j, double v) const {
    const auto& b = box_[j];
    if (std::isfinite(b.lower) && std::isfinite(b.upper)) {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return {b.lower + (b.upper - b.lower) * s, (b.upper - b.lower) * s * (1.0 - s)};
    }
    if (std::isfinite(b.lower)) {
      const double e = std::exp(v);
      return {b.lower + e, e};
    }
    if (std::isfinite(b.upper)) {
      const double e = std::exp(v);
      return {b.upper - e, -e};
    }
    return {v, 1.0};
  }

  std::vector<ParamBound> box_;
};

struct FitConfig {
  AssemblyConfig assembly;
  int max_iterations = 200;
  double gradient_tol = 1e-8;
  double fd_step = 1e-6;
  bool standard_errors = false;
};

struct FitResult {
  FitMethod method = FitMethod::dplr;
  std::vector<double> theta;
  double nll = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  double gradient_norm = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> standard_errors;
  double seconds = 0.0;
  std::string message;
};

struct ValueGrad {
  double value;
  Eigen::VectorXd grad;
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

// BFGS on an inverse-Hessian approximation with Armijo backtracking. A trial
// point whose evaluation throws is treated as a failed step and halved.
inline MinimizeResult minimize_bfgs(const std::function<ValueGrad(const Eigen::VectorXd&)>& fg, Eigen::VectorXd x0,
                                    int max_iterations, double gradient_tol) {
  MinimizeResult res;
  res.x = std::move(x0);
  const Eigen::Index p = res.x.size();
  ValueGrad cur = fg(res.x);
  ++res.evaluations;
  if (!std::isfinite(cur.value) || !cur.grad.allFinite()) {
    res.message = "objective is not finite at the starting point";
    res.value = cur.value;
    res.grad = cur.grad;
    return res;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(p, p);
  bool fresh = true;
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    if (cur.grad.lpNorm<Eigen::Infinity>() <= gradient_tol * std::max(1.0, std::abs(cur.value))) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd d = -H * cur.grad;
    if (cur.grad.dot(d) >= 0.0) {
      H.setIdentity();
      fresh = true;
      d = -cur.grad;
    }
    if (fresh && d.lpNorm<Eigen::Infinity>() > 1.0) d /= d.lpNorm<Eigen::Infinity>();
    const double slope = cur.grad.dot(d);
    double step = 1.0;
    bool accepted = false;
    ValueGrad next{};
    Eigen::VectorXd xn;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      xn = res.x + step * d;
      try {
        next = fg(xn);
        ++res.evaluations;
      } catch (const Error&) {
        ++res.evaluations;
        continue;
      }
      if (!std::isfinite(next.value) || !next.grad.allFinite()) continue;
      const double armijo = cur.value + 1e-4 * step * slope;
      // Near the optimum the decrease drops below the likelihood's roundoff;
      // then the step is judged by the directional derivative instead.
      const double noise = 1e-10 * std::max(1.0, std::abs(cur.value));
      if (next.value <= armijo ||
          (next.value <= armijo + noise && std::abs(next.grad.dot(d)) <= 0.9 * std::abs(slope))) {
        accepted = true;
        break;
      }
    }
    // Extrapolate while the full step is still descending steeply.
    for (int grow = 0; accepted && step == 1.0 && grow < 30 && next.grad.dot(d) < 0.9 * slope; ++grow) {
      const double longer = 2.0 * std::pow(2.0, grow);
      const Eigen::VectorXd xt = res.x + longer * d;
      ValueGrad trial{};
      try {
        trial = fg(xt);
        ++res.evaluations;
      } catch (const Error&) {
        ++res.evaluations;
        break;
      }
      if (!std::isfinite(trial.value) || !trial.grad.allFinite()) break;
      if (trial.value > cur.value + 1e-4 * longer * slope || trial.value >= next.value) break;
      next = std::move(trial);
      xn = xt;
    }
    if (!accepted) {
      if (!fresh) {
        H.setIdentity();
        fresh = true;
        continue;
      }
      res.message = "line search failed";
      break;
    }
    const Eigen::VectorXd s = xn - res.x;
    const Eigen::VectorXd y = next.grad - cur.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
      fresh = false;
    }
    res.x = xn;
    cur = next;
  }
  if (!res.converged && res.message.empty()) res.message = "iteration limit reached";
  res.value = cur.value;
  res.grad = cur.grad;
  return res;
}

// Negative log-likelihood and theta-gradient for one estimation method.
class Objective {
 public:
  Objective(FitMethod method, const SpectralModel& model, const Eigen::VectorXd& y, int r, const FitConfig& cfg)
      : method_(method), model_(model), y_(y), r_(r), cfg_(cfg) {
    if (method == FitMethod::whittle || method == FitMethod::debiased) pgram_ = periodogram(y).values;
  }

  bool analytic_gradient() const { return method_ == FitMethod::dplr || method_ == FitMethod::dense; }

  double value(const std::vector<double>& theta) const {
    const Eigen::Index n = y_.size();
    switch (method_) {
      case FitMethod::whittle:
        return whittle_from_spectrum(sdf_on_grid(model_, theta, n), pgram_);
      case FitMethod::debiased: {
        const AcovTable h = acov_hybrid(model_, theta, n, cfg_.assembly.quadrature);
        return whittle_from_spectrum(detail::clamp_for_log(finite_sample_variances(h)), pgram_);
      }
      case FitMethod::dense:
        return dense::toeplitz_exact_nll(acov_hybrid(model_, theta, n, cfg_.assembly.quadrature).values, y_);
      case FitMethod::dplr:
        return nll(assemble_correction(model_, theta, n, r_, cfg_.assembly), y_);
    }
    return std::numeric_limits<double>::quiet_NaN();
  }

  std::pair<double, std::vector<double>> value_gradient(const std::vector<double>& theta) const {
    const Eigen::Index n = y_.size();
    if (method_ == FitMethod::dplr) {
      GradientResult g = gradient(model_, theta, y_, n, r_, cfg_.assembly);
      return {g.value, g.gradient};
    }
    if (method_ == FitMethod::dense) {
      const auto& q = cfg_.assembly.quadrature;
      const Eigen::VectorXd h = acov_hybrid(model_, theta, n, q).values;
      std::vector<Eigen::VectorXd> dh;
      for (std::size_t j = 0; j < theta.size(); ++j)
        dh.push_back(acov_hybrid(SpectralComponent(model_, theta, static_cast<int>(j)), n, q).values);
      auto g = dense::toeplitz_exact_gradient(h, dh, y_);
      return {g.value, g.gradient};
    }
    fail(ErrorKind::capability, "no analytic gradient for this method");
  }

 private:
  FitMethod method_;
  const SpectralModel& model_;
  const Eigen::VectorXd& y_;
  int r_;
  FitConfig cfg_;
  Eigen::VectorXd pgram_;
};

inline FitResult fit(FitMethod method, const SpectralModel& model, const Eigen::VectorXd& y,
                     std::span<const double> theta0, int r, const FitConfig& cfg = {}) {
  const auto start = std::chrono::steady_clock::now();
  model.check_params(theta0);
  const ParamTransform tf(model.validity_box());
  const Objective obj(method, model, y, r, cfg);
  auto fg = [&](const Eigen::VectorXd& phi) -> ValueGrad {
    const std::vector<double> theta = tf.to_theta(phi);
    model.check_params(theta);
    const Eigen::VectorXd jac = tf.jacobian(phi);
    ValueGrad out{0.0, Eigen::VectorXd(phi.size())};
    if (obj.analytic_gradient()) {
      auto [v, g] = obj.value_gradient(theta);
      out.value = v;
      for (Eigen::Index j = 0; j < phi.size(); ++j) out.grad[j] = g[static_cast<std::size_t>(j)] * jac[j];
    } else {
      out.value = obj.value(theta);
      for (Eigen::Index j = 0; j < phi.size(); ++j) {
        const double h = cfg.fd_step * std::max(1.0, std::abs(phi[j]));
        Eigen::VectorXd a = phi, b = phi;
        a[j] += h;
        b[j] -= h;
        out.grad[j] = (obj.value(tf.to_theta(a)) - obj.value(tf.to_theta(b))) / (2.0 * h);
      }
    }
    return out;
  };

  FitResult res;
  res.method = method;
  try {
    const MinimizeResult m = minimize_bfgs(fg, tf.to_free(theta0), cfg.max_iterations, cfg.gradient_tol);
    res.theta = tf.to_theta(m.x);
    res.nll = m.value;
    res.iterations = m.iterations;
    res.evaluations = m.evaluations;
    res.converged = m.converged;
    res.gradient_norm = m.grad.size() > 0 ? m.grad.lpNorm<Eigen::Infinity>() : 0.0;
    res.message = m.message;
    if (cfg.standard_errors && res.converged) {
      const Eigen::MatrixXd I = fisher_exact(model, res.theta, y.size(), std::max(r, 1), cfg.assembly);
      const Eigen::MatrixXd C = I.inverse();
      for (Eigen::Index j = 0; j < C.rows(); ++j) res.standard_errors.push_back(std::sqrt(std::max(C(j, j), 0.0)));
    }
  } catch (const Error& e) {
    res.theta.assign(theta0.begin(), theta0.end());
    res.converged = false;
    res.message = e.what();
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct StudyConfig {
  FitConfig fit;
  int r = 128;
  int threads = 1;
  // Start likelihood fits from the Whittle estimate when Whittle is among
  // the methods, otherwise from theta0.
  bool warm_start_from_whittle = true;
};

struct StudyRow {
  int trial = 0;
  FitResult result;
};

struct StudySummary {
  FitMethod method;
  std::vector<double> bias, sd;
  // Largest |theta_hat - theta_hat_dense| over trials, when dense was run.
  std::vector<double> max_abs_diff_from_mle;
};

struct StudyResult {
  std::vector<StudyRow> rows;
  std::vector<StudySummary> summary;
  bool used_dense_sampler = false;
};

inline StudyResult estimator_study(const SpectralModel& model, std::span<const double> theta_true, Eigen::Index n,
                                   int trials, const std::vector<FitMethod>& methods, std::uint64_t seed,
                                   std::span<const double> theta0, const StudyConfig& cfg = {}) {
  if (trials < 1) fail(ErrorKind::usage, "study needs at least one trial");
  if (methods.empty()) fail(ErrorKind::usage, "study needs at least one method");
  const std::vector<double> truth(theta_true.begin(), theta_true.end());
  const std::vector<double> start(theta0.begin(), theta0.end());
  const AcovTable h = acov_hybrid(model, truth, n, cfg.fit.assembly.quadrature);

  StudyResult out;
  Eigen::MatrixXd data;
  try {
    data = circulant_embedding_sample(h.values, n, trials, seed, cfg.threads);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::embedding) throw;
    data = cholesky_sample(h.values, n, trials, seed);
    out.used_dense_sampler = true;
  }

  std::vector<std::vector<FitResult>> per(static_cast<std::size_t>(trials));
  parallel_for(static_cast<std::size_t>(trials), cfg.threads, [&](std::size_t t) {
    const Eigen::VectorXd y = data.col(static_cast<Eigen::Index>(t));
    std::vector<double> init = start;
    std::vector<FitResult> results(methods.size());
    const auto it = std::find(methods.begin(), methods.end(), FitMethod::whittle);
    if (it != methods.end()) {
      const auto idx = static_cast<std::size_t>(it - methods.begin());
      results[idx] = fit(FitMethod::whittle, model, y, start, cfg.r, cfg.fit);
      if (cfg.warm_start_from_whittle && results[idx].converged) init = results[idx].theta;
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (methods[m] == FitMethod::whittle) continue;
      results[m] = fit(methods[m], model, y, init, cfg.r, cfg.fit);
    }
    per[t] = std::move(results);
  });

  for (int t = 0; t < trials; ++t)
    for (auto& r : per[static_cast<std::size_t>(t)]) out.rows.push_back({t, r});

  const std::size_t p = truth.size();
  const auto dense_it = std::find(methods.begin(), methods.end(), FitMethod::dense);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    StudySummary s{methods[m], std::vector<double>(p, 0.0), std::vector<double>(p, 0.0), {}};
    for (std::size_t j = 0; j < p; ++j) {
      double mean = 0.0;
      for (int t = 0; t < trials; ++t) mean += per[static_cast<std::size_t>(t)][m].theta[j];
      mean /= trials;
      double var = 0.0;
      for (int t = 0; t < trials; ++t) {
        const double d = per[static_cast<std::size_t>(t)][m].theta[j] - mean;
        var += d * d;
      }
      s.bias[j] = mean - truth[j];
      s.sd[j] = trials > 1 ? std::sqrt(var / (trials - 1)) : 0.0;
    }
    if (dense_it != methods.end()) {
      const auto di = static_cast<std::size_t>(dense_it - methods.begin());
      s.max_abs_diff_from_mle.assign(p, 0.0);
      for (int t = 0; t < trials; ++t)
        for (std::size_t j = 0; j < p; ++j)
          s.max_abs_diff_from_mle[j] =
              std::max(s.max_abs_diff_from_mle[j], std::abs(per[static_cast<std::size_t>(t)][m].theta[j] -
                                                            per[static_cast<std::size_t>(t)][di].theta[j]));
    }
    out.summary.push_back(std::move(s));
  }
  return out;
}

}  // namespace cwhittle
