#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "errors.hpp"

namespace cwhittle {

using cplx = std::complex<double>;

namespace detail {

// Process-wide FFTW plan cache. Plans are created in place with
// FFTW_UNALIGNED so they can be executed on any buffer of the right size;
// planning is serialized because the FFTW planner is not thread safe,
// execution is reentrant.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> scratch(static_cast<std::size_t>(n));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) fail(ErrorKind::numerical, "FFTW could not create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& kv : plans_) fftw_destroy_plan(kv.second);
  }

  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

// Unnormalized in-place transform: sign -1 computes sum_k x_k e^{-2 pi i jk/n}.
inline void fft_inplace(cplx* data, int n, int sign) {
  if (n <= 1) return;
  fftw_plan plan = detail::PlanCache::instance().get(n, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD);
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, buf, buf);
}

inline void fft_inplace(Eigen::VectorXcd& v, int sign) {
  fft_inplace(v.data(), static_cast<int>(v.size()), sign);
}

/// Warms the plan cache so that timed code does not pay for planning.
inline void prepare_plans(int n) {
  detail::PlanCache::instance().get(n, FFTW_FORWARD);
  detail::PlanCache::instance().get(n, FFTW_BACKWARD);
}

inline Eigen::VectorXd frequency_grid(Eigen::Index n) {
  if (n < 2) fail(ErrorKind::size, "frequency grid needs n >= 2");
  Eigen::VectorXd w(n);
  const Eigen::Index half = n / 2;
  for (Eigen::Index j = 0; j < n; ++j)
    w[j] = static_cast<double>(j - half) / static_cast<double>(n);
  return w;
}

// Unitary DFT with negative exponent, rows in fftshift order.
class DftConvention {
 public:
  explicit DftConvention(Eigen::Index n) : n_(n) {
    if (n < 1) fail(ErrorKind::size, "DFT size must be positive");
    prepare_plans(static_cast<int>(n));
  }

  Eigen::Index size() const { return n_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
    check(x.size());
    Eigen::VectorXcd z = x;
    fft_inplace(z, -1);
    Eigen::VectorXcd y(n_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
    for (Eigen::Index r = 0; r < n_; ++r) y[r] = scale * z[unshift(r)];
    return y;
  }

  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& y) const {
    check(y.size());
    Eigen::VectorXcd z(n_);
    for (Eigen::Index r = 0; r < n_; ++r) z[unshift(r)] = y[r];
    fft_inplace(z, +1);
    z *= 1.0 / std::sqrt(static_cast<double>(n_));
    return z;
  }

  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& X) const {
    Eigen::MatrixXcd Y(X.rows(), X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) Y.col(c) = apply(Eigen::VectorXcd(X.col(c)));
    return Y;
  }

  Eigen::MatrixXcd adjoint(const Eigen::MatrixXcd& Y) const {
    Eigen::MatrixXcd X(Y.rows(), Y.cols());
    for (Eigen::Index c = 0; c < Y.cols(); ++c) X.col(c) = adjoint(Eigen::VectorXcd(Y.col(c)));
    return X;
  }

  // Natural FFT index holding shifted row r.
  Eigen::Index unshift(Eigen::Index r) const {
    Eigen::Index f = r - n_ / 2;
    return f < 0 ? f + n_ : f;
  }

 private:
  void check(Eigen::Index len) const {
    if (len != n_) fail(ErrorKind::size, "DFT input length mismatch");
  }

  Eigen::Index n_;
};

inline Eigen::VectorXcd dft_apply(const DftConvention& conv, const Eigen::VectorXcd& x) {
  return conv.apply(x);
}

inline Eigen::VectorXcd dft_adjoint(const DftConvention& conv, const Eigen::VectorXcd& y) {
  return conv.adjoint(y);
}

}  // namespace cwhittle
