#pragma once

#include <Eigen/Dense>

#include "dft.hpp"
#include "errors.hpp"

namespace cwhittle {

// Symmetric Toeplitz matrix with first column h_0..h_{n-1}, multiplied through
// the circulant of length 2n-1 whose first column is
// [h_0..h_{n-1}, h_{n-1}..h_1].
class ToeplitzOperator {
 public:
  explicit ToeplitzOperator(Eigen::VectorXd first_column) : h_(std::move(first_column)) {
    const Eigen::Index n = h_.size();
    if (n < 1) fail(ErrorKind::size, "Toeplitz operator needs at least one entry");
    const Eigen::Index m = 2 * n - 1;
    spectrum_.resize(m);
    for (Eigen::Index k = 0; k < n; ++k) spectrum_[k] = h_[k];
    for (Eigen::Index k = 1; k < n; ++k) spectrum_[m - k] = h_[k];
    prepare_plans(static_cast<int>(m));
    fft_inplace(spectrum_, -1);
  }

  Eigen::Index size() const { return h_.size(); }
  Eigen::Index embedding_size() const { return spectrum_.size(); }
  const Eigen::VectorXd& first_column() const { return h_; }
  const Eigen::VectorXcd& embedded_spectrum() const { return spectrum_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    const Eigen::Index n = size();
    if (v.size() != n) fail(ErrorKind::size, "Toeplitz matvec length mismatch");
    const Eigen::Index m = embedding_size();
    Eigen::VectorXcd buf = Eigen::VectorXcd::Zero(m);
    buf.head(n) = v;
    fft_inplace(buf, -1);
    buf.array() *= spectrum_.array();
    fft_inplace(buf, +1);
    return buf.head(n) / static_cast<double>(m);
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    return apply(Eigen::VectorXcd(v.cast<cplx>())).real();
  }

  Eigen::MatrixXd dense() const {
    const Eigen::Index n = size();
    Eigen::MatrixXd S(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) S(i, j) = h_[i > j ? i - j : j - i];
    return S;
  }

 private:
  Eigen::VectorXd h_;
  Eigen::VectorXcd spectrum_;
};

inline Eigen::VectorXcd toeplitz_matvec(const ToeplitzOperator& T, const Eigen::VectorXcd& v) {
  return T.apply(v);
}

inline Eigen::VectorXd toeplitz_matvec(const ToeplitzOperator& T, const Eigen::VectorXd& v) {
  return T.apply(v);
}

// The Whittle residual E = F Sigma F^H - diag(D) applied without forming it.
class WhittleResidual {
 public:
  WhittleResidual(ToeplitzOperator T, Eigen::VectorXd D)
      : T_(std::move(T)), D_(std::move(D)), dft_(T_.size()) {
    if (D_.size() != T_.size()) fail(ErrorKind::size, "diagonal length mismatch");
  }

  Eigen::Index size() const { return T_.size(); }
  const ToeplitzOperator& toeplitz() const { return T_; }
  const Eigen::VectorXd& diagonal() const { return D_; }
  const DftConvention& dft() const { return dft_; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    if (v.size() != size()) fail(ErrorKind::size, "residual matvec length mismatch");
    Eigen::VectorXcd out = dft_.apply(T_.apply(dft_.adjoint(v)));
    out.array() -= D_.array() * v.array();
    return out;
  }

  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& V) const {
    Eigen::MatrixXcd out(V.rows(), V.cols());
    for (Eigen::Index c = 0; c < V.cols(); ++c) out.col(c) = apply(Eigen::VectorXcd(V.col(c)));
    return out;
  }

 private:
  ToeplitzOperator T_;
  Eigen::VectorXd D_;
  DftConvention dft_;
};

inline Eigen::VectorXcd whittle_residual_matvec(const ToeplitzOperator& T, const Eigen::VectorXd& D,
                                                const Eigen::VectorXcd& v) {
  return WhittleResidual(T, D).apply(v);
}

}  // namespace cwhittle
