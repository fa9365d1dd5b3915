#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "loomix/errors.hpp"

namespace loomix {

/// Rank-one update of a lower Cholesky factor: L Lᵀ + v vᵀ, in place.
inline void chol_update(Eigen::MatrixXd& L, Eigen::VectorXd v) {
  const Eigen::Index n = L.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = std::hypot(L(i, i), v[i]);
    const double c = r / L(i, i);
    const double s = v[i] / L(i, i);
    L(i, i) = r;
    if (i + 1 < n) {
      L.col(i).tail(n - i - 1) =
          (L.col(i).tail(n - i - 1) + s * v.tail(n - i - 1)) / c;
      v.tail(n - i - 1) = c * v.tail(n - i - 1) - s * L.col(i).tail(n - i - 1);
    }
  }
}

/// Rank-one downdate: L Lᵀ - v vᵀ, in place. Throws NumericalError when the
/// result is not positive definite (within tol of singular).
inline void chol_downdate(Eigen::MatrixXd& L, Eigen::VectorXd v,
                          double tol = 1e-14) {
  const Eigen::Index n = L.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = L(i, i);
    const double r2 = (d - v[i]) * (d + v[i]);
    if (!(r2 > tol * d * d)) {
      throw NumericalError("chol_downdate: factor not positive definite");
    }
    const double r = std::sqrt(r2);
    const double c = r / d;
    const double s = v[i] / d;
    L(i, i) = r;
    if (i + 1 < n) {
      L.col(i).tail(n - i - 1) =
          (L.col(i).tail(n - i - 1) - s * v.tail(n - i - 1)) / c;
      v.tail(n - i - 1) = c * v.tail(n - i - 1) - s * L.col(i).tail(n - i - 1);
    }
  }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix; throws
/// NumericalError instead of returning a garbage factor.
inline Eigen::MatrixXd chol_lower(const Eigen::MatrixXd& A,
                                  const char* what = "matrix") {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("Cholesky factorization of ") + what +
                         " failed (not positive definite)");
  }
  return llt.matrixL();
}

/// log-determinant of L Lᵀ given the lower factor L.
inline double logdet_from_chol(const Eigen::MatrixXd& L) {
  return 2.0 * L.diagonal().array().log().sum();
}

}  // namespace loomix
