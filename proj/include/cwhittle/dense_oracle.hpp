#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "quadrature.hpp"
#include "spectral_model.hpp"

// Brute-force references. Nothing here calls the FFT or low-rank code paths.
namespace cwhittle::dense {

using cplx = std::complex<double>;

inline constexpr Eigen::Index covariance_cap = 8192;
inline constexpr Eigen::Index derivative_cap = 4096;

inline Eigen::MatrixXd dense_covariance(const Eigen::VectorXd& h, Eigen::Index n) {
  if (n > covariance_cap) fail(ErrorKind::size, "dense covariance is capped at n = 8192");
  if (h.size() < n) fail(ErrorKind::size, "autocovariance table shorter than n");
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) S(i, j) = h[std::abs(i - j)];
  return S;
}

inline Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& S) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) fail(ErrorKind::not_positive_definite, "covariance is not positive definite");
  return llt;
}

inline double logdet(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline double dense_nll(const Eigen::MatrixXd& S, const Eigen::VectorXd& y) {
  const auto llt = cholesky(S);
  const Eigen::VectorXd w = llt.matrixL().solve(y);
  return 0.5 * (logdet(llt) + w.squaredNorm());
}

struct DenseGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

inline DenseGradient dense_gradient(const Eigen::MatrixXd& S, const std::vector<Eigen::MatrixXd>& dS,
                                    const Eigen::VectorXd& y) {
  if (S.rows() > derivative_cap) fail(ErrorKind::size, "dense gradient is capped at n = 4096");
  const auto llt = cholesky(S);
  const Eigen::VectorXd z = llt.solve(y);
  DenseGradient out;
  out.value = 0.5 * (logdet(llt) + y.dot(z));
  for (const auto& Sj : dS) {
    const Eigen::MatrixXd A = llt.solve(Sj);
    out.gradient.push_back(0.5 * (A.trace() - z.dot(Sj * z)));
  }
  return out;
}

inline Eigen::MatrixXd dense_fisher(const Eigen::MatrixXd& S, const std::vector<Eigen::MatrixXd>& dS) {
  if (S.rows() > derivative_cap) fail(ErrorKind::size, "dense Fisher is capped at n = 4096");
  const auto llt = cholesky(S);
  std::vector<Eigen::MatrixXd> A;
  for (const auto& Sj : dS) A.push_back(llt.solve(Sj));
  const auto p = static_cast<Eigen::Index>(dS.size());
  Eigen::MatrixXd I(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index k = 0; k < p; ++k)
      I(j, k) = 0.5 * (A[static_cast<std::size_t>(j)].array() * A[static_cast<std::size_t>(k)].transpose().array()).sum();
  return I;
}

// Explicit unitary DFT matrix with rows in fftshift order.
inline Eigen::MatrixXcd dft_matrix(Eigen::Index n) {
  Eigen::MatrixXcd F(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    const long f = static_cast<long>(r) - static_cast<long>(n / 2);
    for (Eigen::Index c = 0; c < n; ++c) {
      const long t = (f * static_cast<long>(c)) % static_cast<long>(n);
      F(r, c) = std::polar(scale, -2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n));
    }
  }
  return F;
}

inline Eigen::MatrixXcd conjugated_covariance(const Eigen::MatrixXd& S) {
  const Eigen::MatrixXcd F = dft_matrix(S.rows());
  return F * S.cast<cplx>() * F.adjoint();
}

// Number of eigenvalues of a Hermitian matrix above tol * max |eigenvalue|.
inline Eigen::Index numerical_rank(const Eigen::MatrixXcd& H, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseAbs();
  const double top = lam.maxCoeff();
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] > tol * top) ++count;
  return count;
}

// sin(pi n x) / sin(pi x), continuous through the integers.
inline double dirichlet(double x, Eigen::Index n) {
  const double m = std::round(x);
  const double t = x - m;
  const double sign = (static_cast<long>(m) * (n - 1)) % 2 == 0 ? 1.0 : -1.0;
  const double nn = static_cast<double>(n);
  if (std::abs(t) < 1e-9) {
    const double pt = std::numbers::pi * t;
    return sign * nn * (1.0 - (nn * nn - 1.0) * pt * pt / 6.0);
  }
  return sign * std::sin(std::numbers::pi * nn * t) / std::sin(std::numbers::pi * t);
}

// Entry (k, k') of F Sigma F^H from a one-dimensional integral of S against
// two shifted Dirichlet kernels.
inline cplx dft_cov_quadrature(const SpectralModel& model, const std::vector<double>& theta, Eigen::Index n,
                               Eigen::Index k, Eigen::Index kp, double rel_tol = 1e-12) {
  if (n > 1024) fail(ErrorKind::size, "Dirichlet-kernel quadrature is capped at n = 1024");
  if (k < 0 || k >= n || kp < 0 || kp >= n) fail(ErrorKind::usage, "frequency index out of range");
  model.check_params(theta);
  const double wk = static_cast<double>(k - n / 2) / static_cast<double>(n);
  const double wkp = static_cast<double>(kp - n / 2) / static_cast<double>(n);
  auto integrand = [&](double w) { return dirichlet(wk - w, n) * dirichlet(wkp - w, n) * model.value(theta, w, -1); };

  std::vector<double> breaks = {-0.5, 0.5, wk, wkp};
  for (double x : model.rough_points()) breaks.push_back(x);
  for (Eigen::Index i = 1; i < n; ++i) breaks.push_back(-0.5 + static_cast<double>(i) / static_cast<double>(n));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-15; }),
               breaks.end());

  // Scale for the absolute tolerance: the k = k' integral is about n * S.
  const double scale = static_cast<double>(n) * std::max(model.value(theta, wk, -1), 1e-300);
  double sum = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double lo = breaks[s], hi = breaks[s + 1];
    if (hi <= lo) continue;
    sum += adaptive_gk15(integrand, lo, hi, rel_tol * scale / static_cast<double>(n), rel_tol, 2000).value;
  }
  const double nn = static_cast<double>(n);
  const cplx phase = std::polar(1.0, -std::numbers::pi * (nn - 1.0) * static_cast<double>(k - kp) / nn);
  return phase * sum / nn;
}

// Exact O(n^2) Toeplitz algebra: Durbin recursion for the prediction
// coefficients, then the Gohberg-Semencul representation of the inverse.
class LevinsonToeplitz {
 public:
  explicit LevinsonToeplitz(const Eigen::VectorXd& h) : n_(h.size()) {
    if (n_ < 1) fail(ErrorKind::size, "empty Toeplitz matrix");
    if (!(h[0] > 0.0)) fail(ErrorKind::not_positive_definite, "Toeplitz matrix is not positive definite");
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd prev(n_);
    double v = h[0];
    logdet_ = std::log(v);
    for (Eigen::Index m = 1; m < n_; ++m) {
      double acc = h[m];
      for (Eigen::Index j = 1; j < m; ++j) acc -= phi[j] * h[m - j];
      const double kappa = acc / v;
      prev.head(m) = phi.head(m);
      for (Eigen::Index j = 1; j < m; ++j) phi[j] = prev[j] - kappa * prev[m - j];
      phi[m] = kappa;
      v *= (1.0 - kappa) * (1.0 + kappa);
      if (!(v > 0.0)) fail(ErrorKind::not_positive_definite, "Toeplitz matrix is not positive definite");
      logdet_ += std::log(v);
    }
    v_ = v;
    a_.resize(n_);
    b_.resize(n_);
    a_[0] = 1.0;
    b_[0] = 0.0;
    for (Eigen::Index i = 1; i < n_; ++i) {
      a_[i] = -phi[i];
      b_[i] = -phi[n_ - i];
    }
  }

  Eigen::Index size() const { return n_; }
  double logdet() const { return logdet_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& y) const {
    if (y.size() != n_) fail(ErrorKind::size, "Toeplitz solve length mismatch");
    Eigen::VectorXd out = lower_times(a_, upper_times(a_, y)) - lower_times(b_, upper_times(b_, y));
    return out / v_;
  }

  // d[m] = sum_i (Sigma^{-1})_{i, i+m}.
  Eigen::VectorXd inverse_diagonal_sums() const {
    Eigen::VectorXd d(n_);
    for (Eigen::Index m = 0; m < n_; ++m) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t + m < n_; ++t)
        acc += static_cast<double>(n_ - m - t) * (a_[t] * a_[t + m] - b_[t] * b_[t + m]);
      d[m] = acc / v_;
    }
    return d;
  }

 private:
  // L(c) w with L(c) lower-triangular Toeplitz, first column c.
  Eigen::VectorXd lower_times(const Eigen::VectorXd& c, const Eigen::VectorXd& w) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (Eigen::Index l = 0; l <= i; ++l) acc += c[i - l] * w[l];
      out[i] = acc;
    }
    return out;
  }

  // L(c)^T y.
  Eigen::VectorXd upper_times(const Eigen::VectorXd& c, const Eigen::VectorXd& y) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index l = 0; l < n_; ++l) {
      double acc = 0.0;
      for (Eigen::Index i = l; i < n_; ++i) acc += c[i - l] * y[i];
      out[l] = acc;
    }
    return out;
  }

  Eigen::Index n_;
  double logdet_ = 0.0;
  double v_ = 0.0;
  Eigen::VectorXd a_, b_;
};

// Symmetric Toeplitz product computed directly.
inline Eigen::VectorXd toeplitz_times(const Eigen::VectorXd& h, const Eigen::VectorXd& z) {
  const Eigen::Index n = z.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) acc += h[std::abs(i - j)] * z[j];
    out[i] = acc;
  }
  return out;
}

inline double toeplitz_exact_nll(const Eigen::VectorXd& h, const Eigen::VectorXd& y) {
  const LevinsonToeplitz T(h.head(y.size()));
  return 0.5 * (T.logdet() + y.dot(T.solve(y)));
}

inline DenseGradient toeplitz_exact_gradient(const Eigen::VectorXd& h, const std::vector<Eigen::VectorXd>& dh,
                                             const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  const LevinsonToeplitz T(h.head(n));
  const Eigen::VectorXd z = T.solve(y);
  const Eigen::VectorXd d = T.inverse_diagonal_sums();
  DenseGradient out;
  out.value = 0.5 * (T.logdet() + y.dot(z));
  for (const auto& hj : dh) {
    double trace = d[0] * hj[0];
    for (Eigen::Index m = 1; m < n; ++m) trace += 2.0 * d[m] * hj[m];
    out.gradient.push_back(0.5 * (trace - z.dot(toeplitz_times(hj, z))));
  }
  return out;
}

}  // namespace cwhittle::dense
