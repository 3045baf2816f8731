#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dft.hpp"
#include "dplr_likelihood.hpp"
#include "errors.hpp"
#include "parallel.hpp"

namespace cwhittle {

// Independent seed for draw `index` under a base seed.
inline std::uint64_t draw_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

class CirculantSampler {
 public:
  CirculantSampler(const Eigen::VectorXd& h, Eigen::Index n) : n_(n) {
    if (n < 1) fail(ErrorKind::size, "sample length must be positive");
    if (h.size() < n) fail(ErrorKind::size, "autocovariance table shorter than n");
    const Eigen::Index m = 2 * n - 1;
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(m);
    for (Eigen::Index k = 0; k < n; ++k) c[k] = h[k];
    for (Eigen::Index k = 1; k < n; ++k) c[m - k] = h[k];
    fft_inplace(c, -1);
    Eigen::VectorXd lam = c.real();
    const double top = lam.maxCoeff();
    const double eps = 1e-12;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (lam[i] < -eps * top)
        fail(ErrorKind::embedding,
             "circulant embedding has a negative eigenvalue (" + std::to_string(lam[i]) +
                 "); a larger embedding or a model check is needed");
      if (lam[i] < 0.0) lam[i] = 0.0;
    }
    scale_ = (lam / static_cast<double>(m)).cwiseSqrt();
  }

  Eigen::Index size() const { return n_; }

  Eigen::VectorXd draw(std::uint64_t seed) const {
    const Eigen::Index m = scale_.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXcd w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      w[i] = scale_[i] * cplx(re, im);
    }
    fft_inplace(w, -1);
    return w.head(n_).real();
  }

 private:
  Eigen::Index n_;
  Eigen::VectorXd scale_;
};

// count independent N(0, Sigma) series as the columns of an n x count matrix.
inline Eigen::MatrixXd circulant_embedding_sample(const Eigen::VectorXd& h, Eigen::Index n, Eigen::Index count,
                                                  std::uint64_t seed, int threads = 1) {
  const CirculantSampler sampler(h, n);
  Eigen::MatrixXd out(n, count);
  parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
    out.col(static_cast<Eigen::Index>(i)) = sampler.draw(draw_seed(seed, i));
  });
  return out;
}

// Re(F^H W z) with z having independent N(0,1) real and imaginary parts.
// Intended for validation of the factor, not production sampling.
inline Eigen::VectorXd sample_via_factor(const CorrectedWhittleOperator& opr, std::uint64_t seed) {
  const Eigen::Index n = opr.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXcd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    z[i] = cplx(re, im);
  }
  return DftConvention(n).adjoint(opr.factor().apply(z)).real();
}

// Exact sampling through a dense Cholesky factor; used when the circulant
// embedding is not nonnegative.
inline Eigen::MatrixXd cholesky_sample(const Eigen::VectorXd& h, Eigen::Index n, Eigen::Index count,
                                       std::uint64_t seed) {
  if (n > 8192) fail(ErrorKind::size, "dense sampling is capped at n = 8192");
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) S(i, j) = h[std::abs(i - j)];
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) fail(ErrorKind::not_positive_definite, "covariance is not positive definite");
  Eigen::MatrixXd out(n, count);
  for (Eigen::Index c = 0; c < count; ++c) {
    std::mt19937_64 rng(draw_seed(seed, static_cast<std::uint64_t>(c)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    out.col(c) = llt.matrixL() * z;
  }
  return out;
}

}  // namespace cwhittle
