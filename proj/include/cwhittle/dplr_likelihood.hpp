#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acov.hpp"
#include "dft.hpp"
#include "errors.hpp"
#include "lowrank.hpp"
#include "parallel.hpp"
#include "spectral_model.hpp"
#include "toeplitz.hpp"
#include "whittle.hpp"

namespace cwhittle {

enum class TraceMethod { exact, recompress };

struct AssemblyConfig {
  int oversampling = 5;
  std::uint64_t seed = 0;
  double trunc_tol = 1e-12;
  QuadratureConfig quadrature;
  // Optional per-parameter ranks for the derivative operators; empty means
  // the base rank is used for every parameter.
  std::vector<int> derivative_ranks;
  TraceMethod trace = TraceMethod::exact;
  int threads = 1;
};

// Seed for the sketch of component c (-1 is the spectral density itself).
inline std::uint64_t component_seed(std::uint64_t seed, int component) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(component + 1)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// F Sigma F^H ~= D + U V^H for Sigma generated by S_theta or one of its
// theta-partials, together with its Hermitian eigen form.
class CorrectedWhittleOperator {
 public:
  struct Meta {
    Eigen::Index n = 0;
    int r = 0;
    int p = 0;
    std::uint64_t seed = 0;
    std::string model;
    std::vector<double> theta;
    int component = -1;
  };

  CorrectedWhittleOperator(Meta meta, AcovTable acov, DiagPlusLowRank base, EigCorrection eig)
      : meta_(std::move(meta)),
        acov_(std::move(acov)),
        base_(std::move(base)),
        eig_(std::move(eig)),
        hermitian_(eig_.with_diagonal(base_.D)),
        lazy_(std::make_shared<Lazy>()) {}

  const Meta& meta() const { return meta_; }
  Eigen::Index size() const { return base_.size(); }
  const AcovTable& acov() const { return acov_; }
  const Eigen::VectorXd& diagonal() const { return base_.D; }
  // Rangefinder output D + U V^H.
  const DiagPlusLowRank& base() const { return base_; }
  const EigCorrection& eig() const { return eig_; }
  // D + U Lambda U^H, the representation used for likelihood work.
  const DiagPlusLowRank& hermitian() const { return hermitian_; }

  const DplrSolver& solver() const {
    std::call_once(lazy_->solver_once, [&] { lazy_->solver = std::make_unique<DplrSolver>(hermitian_); });
    return *lazy_->solver;
  }

  const SymmetricFactor& factor() const {
    std::call_once(lazy_->factor_once, [&] { lazy_->factor = std::make_unique<SymmetricFactor>(base_.D, eig_); });
    return *lazy_->factor;
  }

 private:
  struct Lazy {
    std::once_flag solver_once, factor_once;
    std::unique_ptr<DplrSolver> solver;
    std::unique_ptr<SymmetricFactor> factor;
  };

  Meta meta_;
  AcovTable acov_;
  DiagPlusLowRank base_;
  EigCorrection eig_;
  DiagPlusLowRank hermitian_;
  std::shared_ptr<Lazy> lazy_;
};

inline CorrectedWhittleOperator assemble_correction(const SpectralModel& model, std::span<const double> theta,
                                                    Eigen::Index n, int r, const AssemblyConfig& cfg = {},
                                                    int component = -1) {
  if (n < 2) fail(ErrorKind::size, "assembly needs n >= 2");
  if (r < 0) fail(ErrorKind::usage, "rank must be non-negative");
  if (r > 0 && r + cfg.oversampling > n) fail(ErrorKind::size, "r + p exceeds n");
  const SpectralComponent f(model, {theta.begin(), theta.end()}, component);
  AcovTable acov = acov_hybrid(f, n, cfg.quadrature);
  Eigen::VectorXd D = grid_values(f, n);
  if (component < 0)
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(D[j] > 0.0)) fail(ErrorKind::domain, "spectral density is not positive at a Fourier frequency");

  CorrectedWhittleOperator::Meta meta{n, r, cfg.oversampling, cfg.seed, model.name(), {theta.begin(), theta.end()},
                                      component};
  DiagPlusLowRank base(D);
  EigCorrection eig{Eigen::MatrixXcd(n, 0), Eigen::VectorXd(0)};
  if (r > 0) {
    const WhittleResidual E(ToeplitzOperator(acov.values), D);
    auto apply = [&](const Eigen::MatrixXcd& X) { return E.apply(X); };
    LowRankFactors uv = randomized_rangefinder(n, r, cfg.oversampling, component_seed(cfg.seed, component), apply);
    eig = to_eigen_form(uv.U, uv.V, cfg.trunc_tol, D.cwiseAbs().maxCoeff(), true);
    base = DiagPlusLowRank(D, std::move(uv.U), std::move(uv.V));
  }
  return CorrectedWhittleOperator(std::move(meta), std::move(acov), std::move(base), std::move(eig));
}

namespace detail {

inline double realify(cplx z, double tol, const char* what) {
  if (std::abs(z.imag()) > tol * std::max(std::abs(z), 1e-300))
    fail(ErrorKind::numerical, std::string(what) + " has a non-negligible imaginary part");
  return z.real();
}

inline Eigen::VectorXcd dft_of(const Eigen::VectorXd& y) {
  return DftConvention(y.size()).apply(Eigen::VectorXcd(y.cast<cplx>()));
}

// tr(U V^H) = sum of row-wise dot products.
inline cplx factor_trace(const Eigen::MatrixXcd& U, const Eigen::MatrixXcd& V) {
  if (U.cols() == 0) return 0.0;
  return (U.array() * V.array().conjugate()).sum();
}

// Sigma~^{-1} Sigma~_j - D~ D_j as a sum of three factor pairs.
inline std::vector<std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd>> inverse_product_terms(
    const DiagPlusLowRank& inv, const DiagPlusLowRank& dj) {
  std::vector<std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd>> terms;
  const Eigen::VectorXcd dinv = inv.D.cast<cplx>();
  const Eigen::VectorXcd dd = dj.D.cast<cplx>();
  if (dj.rank() > 0) terms.emplace_back(dinv.asDiagonal() * dj.U, dj.V);
  if (inv.rank() > 0) terms.emplace_back(inv.U, dd.asDiagonal() * inv.V);
  if (inv.rank() > 0 && dj.rank() > 0) terms.emplace_back(inv.U * (inv.V.adjoint() * dj.U), dj.V);
  if (terms.empty()) terms.emplace_back(Eigen::MatrixXcd(inv.size(), 0), Eigen::MatrixXcd(inv.size(), 0));
  return terms;
}

inline DiagPlusLowRank recompressed_inverse_product(const DiagPlusLowRank& inv, const DiagPlusLowRank& dj,
                                                    int nominal_rank, int p, std::uint64_t seed) {
  const auto terms = inverse_product_terms(inv, dj);
  Eigen::VectorXd diag = inv.D.cwiseProduct(dj.D);
  Eigen::Index total = 0;
  for (const auto& t : terms) total += t.first.cols();
  if (total == 0) return DiagPlusLowRank(diag);
  const int target = static_cast<int>(std::min<Eigen::Index>(3 * static_cast<Eigen::Index>(nominal_rank), total));
  LowRankFactors ab = recompress_sum(terms, std::max(target, 1), p, seed);
  return DiagPlusLowRank(std::move(diag), std::move(ab.U), std::move(ab.V));
}

inline int derivative_rank(const AssemblyConfig& cfg, int r, std::size_t j) {
  return j < cfg.derivative_ranks.size() ? cfg.derivative_ranks[j] : r;
}

}  // namespace detail

inline double nll(const CorrectedWhittleOperator& opr, const Eigen::VectorXd& y) {
  if (y.size() != opr.size()) fail(ErrorKind::size, "data length does not match the operator");
  const Eigen::VectorXcd yt = detail::dft_of(y);
  const DplrSolver& solver = opr.solver();
  const Eigen::VectorXcd x = solver.solve(yt);
  const double quad = detail::realify(yt.dot(x), 1e-9, "quadratic form");
  return 0.5 * (solver.logdet() + quad);
}

struct GradientResult {
  double value = 0.0;
  std::vector<double> gradient;
};

inline GradientResult gradient(const SpectralModel& model, std::span<const double> theta, const Eigen::VectorXd& y,
                               Eigen::Index n, int r, const AssemblyConfig& cfg = {}) {
  if (y.size() != n) fail(ErrorKind::size, "data length does not match n");
  const CorrectedWhittleOperator base = assemble_correction(model, theta, n, r, cfg);
  const DplrSolver& solver = base.solver();
  const Eigen::VectorXcd yt = detail::dft_of(y);
  const Eigen::VectorXcd z = solver.solve(yt);
  GradientResult out;
  out.value = 0.5 * (solver.logdet() + detail::realify(yt.dot(z), 1e-9, "quadratic form"));
  const std::size_t p = theta.size();
  out.gradient.assign(p, 0.0);
  const DiagPlusLowRank inv = solver.inverse();
  parallel_for(p, cfg.threads, [&](std::size_t j) {
    const int rj = detail::derivative_rank(cfg, r, j);
    const CorrectedWhittleOperator dj = assemble_correction(model, theta, n, rj, cfg, static_cast<int>(j));
    const DiagPlusLowRank& sj = dj.hermitian();
    double trace = 0.0;
    if (cfg.trace == TraceMethod::exact) {
      trace = dplr_trace_product(inv, sj);
    } else {
      const DiagPlusLowRank m = detail::recompressed_inverse_product(
          inv, sj, std::max(r, rj), cfg.oversampling, component_seed(cfg.seed, 1000 + static_cast<int>(j)));
      trace = detail::realify(m.D.sum() + detail::factor_trace(m.U, m.V), 1e-9, "trace");
    }
    const double quad = detail::realify(z.dot(sj.apply(z)), 1e-9, "quadratic form");
    out.gradient[j] = 0.5 * (trace - quad);
  });
  return out;
}

inline Eigen::MatrixXd fisher_exact(const SpectralModel& model, std::span<const double> theta, Eigen::Index n, int r,
                                    const AssemblyConfig& cfg = {}) {
  const CorrectedWhittleOperator base = assemble_correction(model, theta, n, r, cfg);
  const DiagPlusLowRank inv = base.solver().inverse();
  const std::size_t p = theta.size();
  std::vector<DiagPlusLowRank> a(p);
  parallel_for(p, cfg.threads, [&](std::size_t j) {
    const int rj = detail::derivative_rank(cfg, r, j);
    const CorrectedWhittleOperator dj = assemble_correction(model, theta, n, rj, cfg, static_cast<int>(j));
    a[j] = detail::recompressed_inverse_product(inv, dj.hermitian(), std::max(r, rj), cfg.oversampling,
                                                component_seed(cfg.seed, 1000 + static_cast<int>(j)));
  });
  Eigen::MatrixXd I(p, p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k)
      I(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          0.5 * detail::realify(dplr_trace_product_complex(a[j], a[k]), 1e-9, "Fisher trace");
  const double asym = (I - I.transpose()).norm();
  if (asym > 1e-9 * std::max(I.norm(), 1e-300)) fail(ErrorKind::numerical, "Fisher matrix is not symmetric");
  return 0.5 * (I + I.transpose());
}

inline Eigen::MatrixXd fisher_stochastic(const SpectralModel& model, std::span<const double> theta, Eigen::Index n,
                                         int r, int L, std::uint64_t seed, const AssemblyConfig& cfg = {}) {
  if (L < 1) fail(ErrorKind::usage, "need at least one probe vector");
  const CorrectedWhittleOperator base = assemble_correction(model, theta, n, r, cfg);
  const SymmetricFactor& W = base.factor();
  const DplrSolver& solver = base.solver();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<Eigen::VectorXcd> w(static_cast<std::size_t>(L));
  for (auto& wl : w) {
    Eigen::VectorXcd u(n);
    for (Eigen::Index i = 0; i < n; ++i) u[i] = coin(rng) ? 1.0 : -1.0;
    wl = W.solve_adjoint(u);
  }
  const std::size_t p = theta.size();
  // v[j][l] = Sigma~_j W^{-H} u_l and s[j][l] = Sigma~^{-1} v[j][l].
  std::vector<std::vector<Eigen::VectorXcd>> v(p), s(p);
  parallel_for(p, cfg.threads, [&](std::size_t j) {
    const int rj = detail::derivative_rank(cfg, r, j);
    const CorrectedWhittleOperator dj = assemble_correction(model, theta, n, rj, cfg, static_cast<int>(j));
    v[j].resize(static_cast<std::size_t>(L));
    s[j].resize(static_cast<std::size_t>(L));
    for (std::size_t l = 0; l < static_cast<std::size_t>(L); ++l) {
      v[j][l] = dj.hermitian().apply(w[l]);
      s[j][l] = solver.solve(v[j][l]);
    }
  });
  Eigen::MatrixXd I = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (std::size_t l = 0; l < static_cast<std::size_t>(L); ++l) acc += v[j][l].dot(s[j][l]).real();
    I(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = acc / (2.0 * L);
  }
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = j + 1; k < p; ++k) {
      double acc = 0.0;
      for (std::size_t l = 0; l < static_cast<std::size_t>(L); ++l)
        acc += (v[j][l] + v[k][l]).dot(s[j][l] + s[k][l]).real();
      const auto jj = static_cast<Eigen::Index>(j), kk = static_cast<Eigen::Index>(k);
      const double off = acc / (4.0 * L) - 0.5 * I(jj, jj) - 0.5 * I(kk, kk);
      I(jj, kk) = I(kk, jj) = off;
    }
  }
  return I;
}

// W^{-1} F y, complex in general.
inline Eigen::VectorXcd whiten(const CorrectedWhittleOperator& opr, const Eigen::VectorXd& y) {
  if (y.size() != opr.size()) fail(ErrorKind::size, "data length does not match the operator");
  return opr.factor().solve(detail::dft_of(y));
}

// Relative residual ||(E - U V^H) g|| / ||E g|| over random Gaussian probes,
// a cheap check of whether the chosen rank captured the Whittle correction.
inline double correction_residual_estimate(const CorrectedWhittleOperator& opr, int probes = 4,
                                           std::uint64_t seed = 12345) {
  const WhittleResidual E(ToeplitzOperator(opr.acov().values), opr.diagonal());
  const Eigen::MatrixXcd G = standard_normal_matrix(opr.size(), probes, seed).cast<cplx>();
  const Eigen::MatrixXcd EG = E.apply(G);
  Eigen::MatrixXcd R = EG;
  if (opr.base().rank() > 0) R -= opr.base().U * (opr.base().V.adjoint() * G);
  const double denom = EG.norm();
  return denom > 0.0 ? R.norm() / denom : R.norm();
}

}  // namespace cwhittle
