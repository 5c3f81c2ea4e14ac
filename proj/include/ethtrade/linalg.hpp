#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "ethtrade/error.hpp"

namespace ethtrade {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

// Neumaier variant of Kahan summation; order-dependent but deterministic.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

template <class Range>
double compensated_sum(const Range& values) {
  CompensatedSum s;
  for (double v : values) s.add(v);
  return s.value();
}

// Clamps round-off negatives of a quantity that is nonnegative in exact
// arithmetic. Anything below -tol is a bug upstream.
inline double clamp_nonnegative(double x, double tol, const char* what) {
  if (x >= 0.0) return x;
  if (x < -tol) {
    fail(ErrorCode::InternalConsistency,
         std::string(what) + " is negative beyond round-off: " + std::to_string(x));
  }
  return 0.0;
}

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values[k]
};

// Full eigendecomposition of a dense real symmetric matrix via LAPACK dsyevd.
inline SymmetricEigen lapack_symmetric_eigen(Matrix a) {
  const auto n = static_cast<lapack_int>(a.rows());
  require(a.rows() == a.cols(), ErrorCode::InvalidSpec, "eigensolver needs a square matrix");
  SymmetricEigen out;
  out.values.resize(n);
  if (n == 0) return out;
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, out.values.data());
  if (info != 0) {
    fail(ErrorCode::ConvergenceFailure, "dsyevd returned info=" + std::to_string(info));
  }
  out.vectors = std::move(a);
  return out;
}

// Eigendecomposition for the small local matrices (dimension 2^|block|).
inline SymmetricEigen small_symmetric_eigen(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()));
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::ConvergenceFailure, "local eigensolve failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

// Schatten 1-norm, the sum of singular values.
inline double trace_norm(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

inline double trace_norm(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a);
  return svd.singularValues().sum();
}

// Largest singular value.
inline double operator_norm(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

inline double max_abs(const Matrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

inline bool is_hermitian(const CMatrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace ethtrade
