#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dft.hpp"
#include "errors.hpp"

namespace cwhittle {

// diag(D) + U V^H. D may be signed when representing a derivative.
struct DiagPlusLowRank {
  Eigen::VectorXd D;
  Eigen::MatrixXcd U;
  Eigen::MatrixXcd V;

  DiagPlusLowRank() = default;
  explicit DiagPlusLowRank(Eigen::VectorXd d)
      : D(std::move(d)), U(D.size(), 0), V(D.size(), 0) {}
  DiagPlusLowRank(Eigen::VectorXd d, Eigen::MatrixXcd u, Eigen::MatrixXcd v)
      : D(std::move(d)), U(std::move(u)), V(std::move(v)) {
    if (U.rows() != D.size() || V.rows() != D.size() || U.cols() != V.cols())
      fail(ErrorKind::size, "DPLR factor shapes do not match");
  }

  Eigen::Index size() const { return D.size(); }
  Eigen::Index rank() const { return U.cols(); }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    if (v.size() != size()) fail(ErrorKind::size, "DPLR apply length mismatch");
    Eigen::VectorXcd out = D.cast<cplx>().cwiseProduct(v);
    if (rank() > 0) out.noalias() += U * (V.adjoint() * v);
    return out;
  }

  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& M) const {
    Eigen::MatrixXcd out = D.cast<cplx>().asDiagonal() * M;
    if (rank() > 0) out.noalias() += U * (V.adjoint() * M);
    return out;
  }

  Eigen::MatrixXcd dense() const {
    Eigen::MatrixXcd A = U * V.adjoint();
    A.diagonal() += D.cast<cplx>();
    return A;
  }
};

// Hermitian correction U diag(lambda) U^H with orthonormal U, |lambda|
// sorted in descending order.
struct EigCorrection {
  Eigen::MatrixXcd U;
  Eigen::VectorXd lambda;

  Eigen::Index rank() const { return lambda.size(); }

  DiagPlusLowRank with_diagonal(const Eigen::VectorXd& D) const {
    return DiagPlusLowRank(D, U * lambda.cast<cplx>().asDiagonal(), U);
  }
};

struct LowRankFactors {
  Eigen::MatrixXcd U;
  Eigen::MatrixXcd V;
};

inline Eigen::MatrixXd standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) M(r, c) = normal(rng);
  return M;
}

namespace detail {

inline Eigen::MatrixXcd orthonormal_basis(const Eigen::MatrixXcd& Y) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < Y.cols(); ++c)
    if (Y.col(c).squaredNorm() > 0.0) keep.push_back(c);
  const auto w = static_cast<Eigen::Index>(keep.size());
  if (w == 0) return Eigen::MatrixXcd(Y.rows(), 0);
  Eigen::MatrixXcd Yk(Y.rows(), w);
  for (Eigen::Index i = 0; i < w; ++i) Yk.col(i) = Y.col(keep[static_cast<std::size_t>(i)]);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Yk);
  return qr.householderQ() * Eigen::MatrixXcd::Identity(Y.rows(), w);
}

}  // namespace detail

// Sketches a linear operator with r + p real Gaussian probes and returns
// U (orthonormal) and V = A^H U so that A ~= U V^H. Both callbacks map an
// n x w block to an n x w block.
template <class Apply, class ApplyAdjoint>
LowRankFactors randomized_rangefinder(Eigen::Index n, int r, int p, std::uint64_t seed, Apply&& apply,
                                      ApplyAdjoint&& apply_adjoint) {
  if (r < 0 || p < 0) fail(ErrorKind::usage, "rank and oversampling must be non-negative");
  if (r > n || r + p > n) fail(ErrorKind::size, "requested sketch width exceeds the operator size");
  const Eigen::MatrixXcd omega = standard_normal_matrix(n, r + p, seed).cast<cplx>();
  const Eigen::MatrixXcd Y = apply(omega);
  LowRankFactors out;
  out.U = detail::orthonormal_basis(Y);
  out.V = out.U.cols() > 0 ? Eigen::MatrixXcd(apply_adjoint(out.U)) : Eigen::MatrixXcd(n, 0);
  return out;
}

template <class Apply>
LowRankFactors randomized_rangefinder(Eigen::Index n, int r, int p, std::uint64_t seed, Apply&& apply) {
  return randomized_rangefinder(n, r, p, seed, apply, apply);
}

namespace detail {

// Hermitian part of U V^H compressed onto the column space of U.
struct ProjectedCore {
  Eigen::MatrixXcd Q;
  Eigen::MatrixXcd core;
};

inline ProjectedCore projected_core(const Eigen::MatrixXcd& U, const Eigen::MatrixXcd& V,
                                   bool orthonormal = false) {
  const Eigen::Index n = U.rows(), w = U.cols();
  if (orthonormal) return {U, V.adjoint() * U};
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(U);
  const Eigen::Index q = std::min(n, w);
  ProjectedCore pc;
  pc.Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, q);
  const Eigen::MatrixXcd R = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
  pc.core = R * (V.adjoint() * pc.Q);
  return pc;
}

}  // namespace detail

// Rayleigh-Ritz symmetrization of U V^H followed by truncation of
// eigenvalues below trunc_tol * max(max|lambda|, scale).
// Pass orthonormal = true when U already has orthonormal columns (as
// returned by randomized_rangefinder) to skip its QR factorization.
inline EigCorrection to_eigen_form(const Eigen::MatrixXcd& U, const Eigen::MatrixXcd& V, double trunc_tol = 1e-12,
                                   double scale = 0.0, bool orthonormal = false) {
  EigCorrection out;
  if (U.cols() == 0 || (U.norm() == 0.0 || V.norm() == 0.0)) {
    out.U = Eigen::MatrixXcd(U.rows(), 0);
    out.lambda = Eigen::VectorXd(0);
    return out;
  }
  const auto pc = detail::projected_core(U, V, orthonormal);
  const Eigen::MatrixXcd H = 0.5 * (pc.core + pc.core.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  const Eigen::VectorXd& lam = es.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(lam.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return std::abs(lam[a]) > std::abs(lam[b]); });
  const double top = lam.size() > 0 ? std::abs(lam[order.front()]) : 0.0;
  const double cut = trunc_tol * std::max(top, scale);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i : order)
    if (std::abs(lam[i]) > 0.0 && std::abs(lam[i]) >= cut) keep.push_back(i);
  const auto r = static_cast<Eigen::Index>(keep.size());
  out.U.resize(U.rows(), r);
  out.lambda.resize(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Eigen::Index src = keep[static_cast<std::size_t>(i)];
    out.U.col(i) = pc.Q * es.eigenvectors().col(src);
    out.lambda[i] = lam[src];
  }
  return out;
}

// Woodbury solves and determinant-lemma log-determinant for a DPLR matrix.
class DplrSolver {
 public:
  explicit DplrSolver(const DiagPlusLowRank& A) : A_(A) {
    inv_d_ = A.D.cwiseInverse();
    if (!inv_d_.allFinite()) fail(ErrorKind::domain, "DPLR diagonal has a zero entry");
    const Eigen::Index r = A.rank();
    if (r > 0) {
      dinv_u_ = inv_d_.cast<cplx>().asDiagonal() * A.U;
      Eigen::MatrixXcd cap = Eigen::MatrixXcd::Identity(r, r) + A.V.adjoint() * dinv_u_;
      lu_.compute(cap);
      const double rc = lu_.rcond();
      if (!(rc > 1e-15))
        fail(ErrorKind::indefinite, "capacitance matrix is singular; check the rank or the model");
    }
  }

  const DiagPlusLowRank& matrix() const { return A_; }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const {
    if (b.size() != A_.size()) fail(ErrorKind::size, "DPLR solve length mismatch");
    Eigen::VectorXcd x = inv_d_.cast<cplx>().cwiseProduct(b);
    if (A_.rank() > 0) x.noalias() -= dinv_u_ * lu_.solve(A_.V.adjoint() * x);
    return x;
  }

  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& B) const {
    Eigen::MatrixXcd X = inv_d_.cast<cplx>().asDiagonal() * B;
    if (A_.rank() > 0) X.noalias() -= dinv_u_ * lu_.solve(A_.V.adjoint() * X);
    return X;
  }

  double logdet() const {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < A_.size(); ++j) {
      if (!(A_.D[j] > 0.0)) fail(ErrorKind::domain, "DPLR log-determinant needs a positive diagonal");
      acc += std::log(A_.D[j]);
    }
    if (A_.rank() == 0) return acc;
    const Eigen::MatrixXcd& lu = lu_.matrixLU();
    cplx phase = static_cast<double>(lu_.permutationP().determinant());
    for (Eigen::Index i = 0; i < lu.rows(); ++i) {
      const cplx u = lu(i, i);
      acc += std::log(std::abs(u));
      phase *= u / std::abs(u);
    }
    if (phase.real() <= 0.0)
      fail(ErrorKind::indefinite, "capacitance determinant is not positive; the matrix is indefinite");
    if (std::abs(std::arg(phase)) > 1e-10)
      fail(ErrorKind::numerical, "capacitance determinant has a non-negligible imaginary part");
    return acc;
  }

  // A^{-1} = D^{-1} + (-D^{-1} U C^{-1}) (D^{-1} V)^H as a DPLR.
  DiagPlusLowRank inverse() const {
    if (A_.rank() == 0) return DiagPlusLowRank(inv_d_);
    Eigen::MatrixXcd left = -(dinv_u_ * lu_.inverse());
    Eigen::MatrixXcd right = inv_d_.cast<cplx>().asDiagonal() * A_.V;
    return DiagPlusLowRank(inv_d_, std::move(left), std::move(right));
  }

 private:
  DiagPlusLowRank A_;
  Eigen::VectorXd inv_d_;
  Eigen::MatrixXcd dinv_u_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

inline Eigen::VectorXcd dplr_solve(const DiagPlusLowRank& A, const Eigen::VectorXcd& b) {
  return DplrSolver(A).solve(b);
}

inline double dplr_logdet(const DiagPlusLowRank& A) { return DplrSolver(A).logdet(); }

inline cplx dplr_trace_product_complex(const DiagPlusLowRank& A, const DiagPlusLowRank& B) {
  if (A.size() != B.size()) fail(ErrorKind::size, "trace product size mismatch");
  cplx t = A.D.dot(B.D);
  if (B.rank() > 0) t += (A.D.cast<cplx>().array() * (B.U.array() * B.V.array().conjugate()).rowwise().sum()).sum();
  if (A.rank() > 0) t += (B.D.cast<cplx>().array() * (A.U.array() * A.V.array().conjugate()).rowwise().sum()).sum();
  if (A.rank() > 0 && B.rank() > 0) {
    const Eigen::MatrixXcd P = A.V.adjoint() * B.U;
    const Eigen::MatrixXcd Q = B.V.adjoint() * A.U;
    t += (P.array() * Q.transpose().array()).sum();
  }
  return t;
}

// tr(A B) for DPLR matrices whose product has a real trace.
inline double dplr_trace_product(const DiagPlusLowRank& A, const DiagPlusLowRank& B) {
  const cplx t = dplr_trace_product_complex(A, B);
  if (std::abs(t.imag()) > 1e-9 * std::abs(t))
    fail(ErrorKind::numerical, "trace product has a non-negligible imaginary part");
  return t.real();
}

// Compresses M = sum_t U_t V_t^H to A B^H with a randomized rangefinder.
inline LowRankFactors recompress_sum(const std::vector<std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd>>& terms,
                                     int target_rank, int p, std::uint64_t seed) {
  if (terms.empty()) fail(ErrorKind::usage, "recompress_sum needs at least one term");
  const Eigen::Index n = terms.front().first.rows();
  Eigen::Index total = 0;
  for (const auto& [u, v] : terms) {
    if (u.rows() != n || v.rows() != n || u.cols() != v.cols()) fail(ErrorKind::size, "term shapes do not match");
    total += u.cols();
  }
  const int r = static_cast<int>(std::min<Eigen::Index>({static_cast<Eigen::Index>(target_rank), total, n}));
  const int width = static_cast<int>(std::min<Eigen::Index>(r + p, n));
  auto apply = [&](const Eigen::MatrixXcd& X) {
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, X.cols());
    for (const auto& [u, v] : terms)
      if (u.cols() > 0) Y.noalias() += u * (v.adjoint() * X);
    return Y;
  };
  auto adjoint = [&](const Eigen::MatrixXcd& X) {
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, X.cols());
    for (const auto& [u, v] : terms)
      if (u.cols() > 0) Y.noalias() += v * (u.adjoint() * X);
    return Y;
  };
  return randomized_rangefinder(n, r, width - r, seed, apply, adjoint);
}

// W with W W^H = diag(D) + U diag(lambda) U^H, applied as
// W v = D^{1/2} (v + Ut X Ut^H v) with Ut = D^{-1/2} U.
class SymmetricFactor {
 public:
  SymmetricFactor(const Eigen::VectorXd& D, const EigCorrection& eig) {
    if (eig.U.rows() != D.size()) fail(ErrorKind::size, "factor shapes do not match");
    for (Eigen::Index j = 0; j < D.size(); ++j)
      if (!(D[j] > 0.0)) fail(ErrorKind::not_positive_definite, "symmetric factor needs a positive diagonal");
    d_sqrt_ = D.cwiseSqrt();
    const Eigen::Index r = eig.rank();
    ut_ = d_sqrt_.cwiseInverse().cast<cplx>().asDiagonal() * eig.U;
    if (r == 0) {
      x_ = Eigen::MatrixXcd(0, 0);
      return;
    }
    gram_ = ut_.adjoint() * ut_;
    Eigen::LLT<Eigen::MatrixXcd> llt(gram_);
    if (llt.info() != Eigen::Success) fail(ErrorKind::not_positive_definite, "scaled basis is rank deficient");
    const Eigen::MatrixXcd L = llt.matrixL();
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(r, r);
    const Eigen::MatrixXcd M = I + L.adjoint() * eig.lambda.cast<cplx>().asDiagonal() * L;
    Eigen::LLT<Eigen::MatrixXcd> inner(M);
    if (inner.info() != Eigen::Success)
      fail(ErrorKind::not_positive_definite,
           "I + L^H Lambda L is not positive definite; the rank may be too small or the model invalid");
    const Eigen::MatrixXcd G = inner.matrixL();
    const Eigen::MatrixXcd Linv = L.triangularView<Eigen::Lower>().solve(I);
    x_ = Linv.adjoint() * (G - I) * Linv;
    lu_ = Eigen::PartialPivLU<Eigen::MatrixXcd>(I + gram_ * x_);
    lu_adj_ = Eigen::PartialPivLU<Eigen::MatrixXcd>(I + gram_ * x_.adjoint());
  }

  Eigen::Index size() const { return d_sqrt_.size(); }
  Eigen::Index rank() const { return ut_.cols(); }
  const Eigen::VectorXd& d_sqrt() const { return d_sqrt_; }
  const Eigen::MatrixXcd& utilde() const { return ut_; }
  const Eigen::MatrixXcd& core() const { return x_; }

  // W v
  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd t = v;
    if (rank() > 0) t.noalias() += ut_ * (x_ * (ut_.adjoint() * v));
    return d_sqrt_.cast<cplx>().cwiseProduct(t);
  }

  // W^H v
  Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd t = d_sqrt_.cast<cplx>().cwiseProduct(v);
    if (rank() > 0) {
      const Eigen::VectorXcd s = ut_.adjoint() * t;
      t.noalias() += ut_ * (x_.adjoint() * s);
    }
    return t;
  }

  // W^{-1} v
  Eigen::VectorXcd solve(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd t = d_sqrt_.cwiseInverse().cast<cplx>().cwiseProduct(v);
    if (rank() > 0) t.noalias() -= ut_ * (x_ * lu_.solve(ut_.adjoint() * t));
    return t;
  }

  // W^{-H} v
  Eigen::VectorXcd solve_adjoint(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd t = v;
    if (rank() > 0) t.noalias() -= ut_ * (x_.adjoint() * lu_adj_.solve(ut_.adjoint() * v));
    return d_sqrt_.cwiseInverse().cast<cplx>().cwiseProduct(t);
  }

 private:
  Eigen::VectorXd d_sqrt_;
  Eigen::MatrixXcd ut_;
  Eigen::MatrixXcd x_;
  Eigen::MatrixXcd gram_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_adj_;
};

inline SymmetricFactor build_symmetric_factor(const Eigen::VectorXd& D, const EigCorrection& eig) {
  return SymmetricFactor(D, eig);
}

}  // namespace cwhittle
