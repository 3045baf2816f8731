#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acov.hpp"
#include "dft.hpp"
#include "errors.hpp"
#include "spectral_model.hpp"

namespace cwhittle {

struct Periodogram {
  Eigen::VectorXd values;
};

inline Periodogram periodogram(const Eigen::VectorXd& y) {
  if (y.size() < 2) fail(ErrorKind::size, "periodogram needs n >= 2");
  const DftConvention dft(y.size());
  return {dft.apply(Eigen::VectorXcd(y.cast<cplx>())).cwiseAbs2()};
}

// S (or one of its theta-partials) on the shifted Fourier grid.
template <SpectralFunction F>
Eigen::VectorXd grid_values(const F& f, Eigen::Index n) {
  const Eigen::VectorXd w = frequency_grid(n);
  Eigen::VectorXd s(n);
  for (Eigen::Index j = 0; j < n; ++j) s[j] = f.value(w[j]);
  return s;
}

inline Eigen::VectorXd sdf_on_grid(const SpectralModel& model, std::span<const double> theta, Eigen::Index n,
                                   int component = -1) {
  return grid_values(SpectralComponent(model, {theta.begin(), theta.end()}, component), n);
}

// 1/2 sum_j [log S_j + I_j / S_j].
inline double whittle_from_spectrum(const Eigen::VectorXd& S, const Eigen::VectorXd& I) {
  if (S.size() != I.size()) fail(ErrorKind::size, "spectrum and periodogram lengths differ");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < S.size(); ++j) {
    if (!(S[j] > 0.0)) fail(ErrorKind::domain, "spectral density is not positive at a Fourier frequency");
    acc += std::log(S[j]) + I[j] / S[j];
  }
  return 0.5 * acc;
}

inline double whittle_nll(const SpectralModel& model, std::span<const double> theta, const Eigen::VectorXd& y) {
  return whittle_from_spectrum(sdf_on_grid(model, theta, y.size()), periodogram(y).values);
}

// Exact variances of the DFT coefficients, 2 Re sum_k (1 - k/n) h_k
// e^{-2 pi i w_j k} - h_0, on the shifted grid.
inline Eigen::VectorXd finite_sample_variances(const Eigen::VectorXd& h, Eigen::Index n) {
  if (n < 2) fail(ErrorKind::size, "finite-sample variances need n >= 2");
  if (h.size() < n) fail(ErrorKind::size, "autocovariance table shorter than n");
  Eigen::VectorXcd a(n);
  for (Eigen::Index k = 0; k < n; ++k) a[k] = (1.0 - static_cast<double>(k) / static_cast<double>(n)) * h[k];
  fft_inplace(a, -1);
  const DftConvention dft(n);
  Eigen::VectorXd s(n);
  for (Eigen::Index r = 0; r < n; ++r) s[r] = 2.0 * a[dft.unshift(r)].real() - h[0];
  return s;
}

inline Eigen::VectorXd finite_sample_variances(const AcovTable& acov) {
  return finite_sample_variances(acov.values, acov.size());
}

namespace detail {

inline Eigen::VectorXd clamp_for_log(const Eigen::VectorXd& s) {
  Eigen::VectorXd out = s;
  int bad = 0;
  for (Eigen::Index j = 0; j < out.size(); ++j) {
    if (!(out[j] > 0.0)) {
      out[j] = 1e-300;
      ++bad;
    }
  }
  if (bad > 0)
    warn(std::to_string(bad) + " finite-sample variance(s) were not positive and were clamped to 1e-300");
  return out;
}

}  // namespace detail

inline double debiased_whittle_nll(const Eigen::VectorXd& y, const AcovTable& acov) {
  const Eigen::VectorXd s = detail::clamp_for_log(finite_sample_variances(acov.values, y.size()));
  return whittle_from_spectrum(s, periodogram(y).values);
}

inline double debiased_whittle_nll(const SpectralModel& model, std::span<const double> theta,
                                   const Eigen::VectorXd& y, const AcovTable& acov) {
  model.check_params(theta);
  return debiased_whittle_nll(y, acov);
}

inline double debiased_whittle_nll(const SpectralModel& model, std::span<const double> theta,
                                   const Eigen::VectorXd& y, const QuadratureConfig& cfg = {}) {
  return debiased_whittle_nll(y, acov_hybrid(model, theta, y.size(), cfg));
}

// Analytic gradient of the Whittle likelihood.
inline std::vector<double> whittle_gradient(const SpectralModel& model, std::span<const double> theta,
                                            const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  const Eigen::VectorXd S = sdf_on_grid(model, theta, n);
  const Eigen::VectorXd I = periodogram(y).values;
  std::vector<double> g(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const Eigen::VectorXd dS = sdf_on_grid(model, theta, n, static_cast<int>(j));
    g[j] = 0.5 * ((S.array().inverse() - I.array() / S.array().square()) * dS.array()).sum();
  }
  return g;
}

// Analytic gradient of the debiased Whittle likelihood; the variance
// derivatives come from the autocovariances of the theta-partials.
inline std::vector<double> debiased_whittle_gradient(const SpectralModel& model, std::span<const double> theta,
                                                     const Eigen::VectorXd& y, const QuadratureConfig& cfg = {}) {
  const Eigen::Index n = y.size();
  const std::vector<double> th(theta.begin(), theta.end());
  const Eigen::VectorXd S = detail::clamp_for_log(finite_sample_variances(acov_hybrid(model, theta, n, cfg)));
  const Eigen::VectorXd I = periodogram(y).values;
  std::vector<double> g(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const AcovTable dh = acov_hybrid(SpectralComponent(model, th, static_cast<int>(j)), n, cfg);
    const Eigen::VectorXd dS = finite_sample_variances(dh.values, n);
    g[j] = 0.5 * ((S.array().inverse() - I.array() / S.array().square()) * dS.array()).sum();
  }
  return g;
}

}  // namespace cwhittle
