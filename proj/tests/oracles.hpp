// Independent numerical oracles used by the test suites: finite differences,
// quadrature, and direct (inverse-based) conjugate refits. Everything here is
// deliberately brute force and shares no code path with the library
// implementations it checks.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "loomix/conjugate.hpp"
#include "loomix/rng.hpp"

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Central finite differences with per-coordinate step 1e-6 * (1 + |theta_k|).
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& theta) {
  VectorXd g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = 1e-6 * (1.0 + std::abs(theta[k]));
    VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    g[k] = (f(tp) - f(tm)) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const VectorXd& a, const VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double scale = std::max({std::abs(a[k]), std::abs(b[k]), 1e-8});
    worst = std::max(worst, std::abs(a[k] - b[k]) / scale);
  }
  return worst;
}

/// Adaptive Simpson on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-12, int depth = 24) {
  const std::function<double(double, double, double, double, double, double,
                             double, int)>
      rec = [&](double lo, double hi, double flo, double fmid, double fhi,
                double whole, double eps, int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lmid = 0.5 * (lo + mid);
    const double rmid = 0.5 * (mid + hi);
    const double fl = f(lmid);
    const double fr = f(rmid);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
    if (d <= 0 || std::abs(left + right - whole) < 15.0 * eps) {
      return left + right + (left + right - whole) / 15.0;
    }
    return rec(lo, mid, flo, fl, fmid, left, eps / 2.0, d - 1) +
           rec(mid, hi, fmid, fr, fhi, right, eps / 2.0, d - 1);
  };
  const double mid = 0.5 * (a + b);
  const double fa = f(a), fm = f(mid), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return rec(a, mid, fa, f(0.5 * (a + mid)), fm, whole, tol, depth) +
         rec(mid, b, fm, f(0.5 * (mid + b)), fb, whole, tol, depth);
}

/// Gauss-Hermite nodes/weights for integrals of f(x) exp(-x^2) via the
/// Golub-Welsch eigen decomposition of the Jacobi matrix.
inline void gauss_hermite(int m, VectorXd& nodes, VectorXd& weights) {
  MatrixXd J = MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    const double off = std::sqrt(k / 2.0);
    J(k, k - 1) = off;
    J(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  nodes = es.eigenvalues();
  weights.resize(m);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int k = 0; k < m; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    weights[k] = sqrt_pi * v0 * v0;
  }
}

/// Direct conjugate refit via dense inverses; no Cholesky downdates, no
/// shared code with ConjugateSolver.
struct DirectFit {
  VectorXd mean;
  MatrixXd cov;
};

inline DirectFit direct_conjugate_fit(const MatrixXd& X, const VectorXd& y,
                                      double sigma2, const MatrixXd& prior_prec,
                                      const VectorXd& prior_mean) {
  const MatrixXd P = X.transpose() * X / sigma2 + prior_prec;
  DirectFit fit;
  fit.cov = P.inverse();
  fit.mean = fit.cov * (X.transpose() * y / sigma2 + prior_prec * prior_mean);
  return fit;
}

/// The same fit with one row deleted.
inline DirectFit direct_loo_fit(const MatrixXd& X, const VectorXd& y,
                                Eigen::Index drop, double sigma2,
                                const MatrixXd& prior_prec,
                                const VectorXd& prior_mean) {
  const Eigen::Index n = X.rows();
  MatrixXd Xm(n - 1, X.cols());
  VectorXd ym(n - 1);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == drop) continue;
    Xm.row(r) = X.row(i);
    ym[r] = y[i];
    ++r;
  }
  return direct_conjugate_fit(Xm, ym, sigma2, prior_prec, prior_mean);
}

inline MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, loomix::Rng& rng) {
  MatrixXd X(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) X(i, j) = rng.normal();
  }
  return X;
}

inline VectorXd random_vector(Eigen::Index n, loomix::Rng& rng) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace oracles
