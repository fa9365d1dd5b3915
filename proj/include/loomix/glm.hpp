#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "loomix/dataset.hpp"
#include "loomix/math.hpp"
#include "loomix/model.hpp"

namespace loomix {

/// Per-coordinate prior for regression coefficients: Gaussian(theta0, nu2)
/// or Laplace(0, b).
struct CoefPrior {
  enum class Kind { Gaussian, Laplace };

  Kind kind = Kind::Gaussian;
  double gaussian_var = 1.0;   // nu^2, per coordinate
  double laplace_scale = 1.0;  // b, per coordinate; variance = 2 b^2
  VectorXd mean;               // Gaussian only; empty = zero

  static CoefPrior gaussian(double var, VectorXd mean = {}) {
    if (!(var > 0.0)) throw ConfigError("coef prior: variance must be positive");
    CoefPrior p;
    p.kind = Kind::Gaussian;
    p.gaussian_var = var;
    p.mean = std::move(mean);
    return p;
  }
  static CoefPrior laplace(double scale) {
    if (!(scale > 0.0)) throw ConfigError("coef prior: scale must be positive");
    CoefPrior p;
    p.kind = Kind::Laplace;
    p.laplace_scale = scale;
    return p;
  }
  /// Laplace prior matching a requested per-coordinate variance: b = sqrt(v/2).
  static CoefPrior laplace_with_variance(double var) {
    return laplace(std::sqrt(var / 2.0));
  }

  double mean_at(Eigen::Index k) const {
    return mean.size() == 0 ? 0.0 : mean[k];
  }

  double logpdf(const VectorXd& theta) const {
    if (kind == Kind::Gaussian) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        s += normal_logpdf(theta[k], mean_at(k), gaussian_var);
      }
      return s;
    }
    const double b = laplace_scale;
    return -theta.size() * std::log(2.0 * b) -
           theta.array().abs().sum() / b;
  }

  /// Gradient; the Laplace kink at zero uses sign(0) = 0.
  VectorXd grad(const VectorXd& theta) const {
    VectorXd g(theta.size());
    if (kind == Kind::Gaussian) {
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        g[k] = -(theta[k] - mean_at(k)) / gaussian_var;
      }
      return g;
    }
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      g[k] = theta[k] > 0.0 ? -1.0 / laplace_scale
             : theta[k] < 0.0 ? 1.0 / laplace_scale
                              : 0.0;
    }
    return g;
  }

  double draw_coord(Eigen::Index k, Rng& rng) const {
    if (kind == Kind::Gaussian) {
      return mean_at(k) + std::sqrt(gaussian_var) * rng.normal();
    }
    const double u = rng.uniform() - 0.5;
    return -laplace_scale * (u >= 0.0 ? 1.0 : -1.0) *
           std::log1p(-2.0 * std::abs(u));
  }
};

/// Bayesian logistic regression: y_i in {0,1} with success probability
/// sigmoid(x_i^T theta), Gaussian or Laplace coefficient priors.
class LogisticModel final : public PointwiseModel {
 public:
  LogisticModel(Dataset data, CoefPrior prior)
      : data_(std::move(data)), prior_(std::move(prior)) {
    if (!data_.binary_response()) {
      throw DataError("logistic model: responses must be 0/1");
    }
  }

  const Dataset& data() const { return data_; }
  const CoefPrior& prior() const { return prior_; }

  Eigen::Index n_obs() const override { return data_.n(); }
  Eigen::Index dim() const override { return data_.p(); }

  double log_prior(const VectorXd& theta) const override {
    return prior_.logpdf(theta);
  }
  VectorXd grad_log_prior(const VectorXd& theta) const override {
    return prior_.grad(theta);
  }
  double log_lik_term(Eigen::Index i, const VectorXd& theta) const override {
    const double eta = data_.X().row(i).dot(theta);
    return data_.y()[i] * eta - softplus(eta);
  }
  VectorXd grad_log_lik_term(Eigen::Index i,
                             const VectorXd& theta) const override {
    const double eta = data_.X().row(i).dot(theta);
    return data_.X().row(i).transpose() * (data_.y()[i] - sigmoid(eta));
  }
  void log_lik_terms(const VectorXd& theta, VectorXd& out) const override {
    const VectorXd eta = data_.X() * theta;
    out.resize(data_.n());
    for (Eigen::Index i = 0; i < data_.n(); ++i) {
      out[i] = data_.y()[i] * eta[i] - softplus(eta[i]);
    }
  }
  VectorXd weighted_grad_loglik(const VectorXd& theta,
                                const VectorXd& v) const override {
    const VectorXd eta = data_.X() * theta;
    VectorXd s(data_.n());
    for (Eigen::Index i = 0; i < data_.n(); ++i) {
      s[i] = v[i] * (data_.y()[i] - sigmoid(eta[i]));
    }
    return data_.X().transpose() * s;
  }
  MatrixXd loglik_matrix(const MatrixXd& thetas) const override {
    MatrixXd eta = data_.X() * thetas;
    for (Eigen::Index s = 0; s < eta.cols(); ++s) {
      for (Eigen::Index i = 0; i < eta.rows(); ++i) {
        eta(i, s) = data_.y()[i] * eta(i, s) - softplus(eta(i, s));
      }
    }
    return eta;
  }
  VectorXd prior_draw(Rng& rng) const override {
    VectorXd t(dim());
    for (Eigen::Index k = 0; k < t.size(); ++k) t[k] = prior_.draw_coord(k, rng);
    return t;
  }

 private:
  Dataset data_;
  CoefPrior prior_;
};

/// Gaussian likelihood with unknown noise: y_i ~ N(x_i^T theta, sigma2),
/// sigma2 ~ InvGamma(shape, rate) and coefficient prior Gaussian or Laplace.
/// The sampling space is unconstrained: the last parameter is
/// lambda = log sigma2, with the Jacobian folded into the prior.
class GaussianUnknownNoiseModel final : public PointwiseModel {
 public:
  GaussianUnknownNoiseModel(Dataset data, CoefPrior prior_theta,
                            double ig_shape = 4.0, double ig_rate = 6.0)
      : data_(std::move(data)),
        prior_theta_(std::move(prior_theta)),
        shape_(ig_shape),
        rate_(ig_rate) {
    if (!(shape_ > 0.0) || !(rate_ > 0.0)) {
      throw ConfigError("inverse-gamma prior: shape and rate must be positive");
    }
  }

  const Dataset& data() const { return data_; }

  Eigen::Index n_obs() const override { return data_.n(); }
  Eigen::Index dim() const override { return data_.p() + 1; }

  double log_prior(const VectorXd& theta) const override {
    const double lambda = theta[data_.p()];
    // InvGamma(shape, rate) on sigma2 = e^lambda plus log-Jacobian d sigma2/d lambda
    const double lp_lambda = shape_ * std::log(rate_) - std::lgamma(shape_) -
                             shape_ * lambda - rate_ * std::exp(-lambda);
    return prior_theta_.logpdf(theta.head(data_.p())) + lp_lambda;
  }
  VectorXd grad_log_prior(const VectorXd& theta) const override {
    VectorXd g(dim());
    g.head(data_.p()) = prior_theta_.grad(theta.head(data_.p()));
    const double lambda = theta[data_.p()];
    g[data_.p()] = -shape_ + rate_ * std::exp(-lambda);
    return g;
  }
  double log_lik_term(Eigen::Index i, const VectorXd& theta) const override {
    const double lambda = theta[data_.p()];
    const double r = data_.y()[i] - data_.X().row(i).dot(theta.head(data_.p()));
    return -0.5 * (kLog2Pi + lambda) - 0.5 * r * r * std::exp(-lambda);
  }
  VectorXd grad_log_lik_term(Eigen::Index i,
                             const VectorXd& theta) const override {
    const double lambda = theta[data_.p()];
    const double inv_s2 = std::exp(-lambda);
    const double r = data_.y()[i] - data_.X().row(i).dot(theta.head(data_.p()));
    VectorXd g(dim());
    g.head(data_.p()) = data_.X().row(i).transpose() * (r * inv_s2);
    g[data_.p()] = -0.5 + 0.5 * r * r * inv_s2;
    return g;
  }
  void log_lik_terms(const VectorXd& theta, VectorXd& out) const override {
    const double lambda = theta[data_.p()];
    const double inv_s2 = std::exp(-lambda);
    const VectorXd r = data_.y() - data_.X() * theta.head(data_.p());
    out = -0.5 * (kLog2Pi + lambda) -
          0.5 * inv_s2 * r.array().square();
  }
  VectorXd weighted_grad_loglik(const VectorXd& theta,
                                const VectorXd& v) const override {
    const double lambda = theta[data_.p()];
    const double inv_s2 = std::exp(-lambda);
    const VectorXd r = data_.y() - data_.X() * theta.head(data_.p());
    VectorXd g(dim());
    g.head(data_.p()) =
        data_.X().transpose() * (v.cwiseProduct(r)) * inv_s2;
    g[data_.p()] =
        -0.5 * v.sum() + 0.5 * inv_s2 * v.dot(r.array().square().matrix());
    return g;
  }
  MatrixXd loglik_matrix(const MatrixXd& thetas) const override {
    MatrixXd eta = data_.X() * thetas.topRows(data_.p());
    MatrixXd out(data_.n(), thetas.cols());
    for (Eigen::Index s = 0; s < thetas.cols(); ++s) {
      const double lambda = thetas(data_.p(), s);
      const double inv_s2 = std::exp(-lambda);
      out.col(s) = -0.5 * (kLog2Pi + lambda) -
                   0.5 * inv_s2 *
                       (data_.y() - eta.col(s)).array().square();
    }
    return out;
  }
  VectorXd prior_draw(Rng& rng) const override {
    VectorXd t(dim());
    for (Eigen::Index k = 0; k < data_.p(); ++k) {
      t[k] = prior_theta_.draw_coord(k, rng);
    }
    // sigma2 ~ InvGamma(shape, rate) => rate / Gamma(shape)
    t[data_.p()] = std::log(rate_ / rng.gamma(shape_));
    return t;
  }

 private:
  Dataset data_;
  CoefPrior prior_theta_;
  double shape_;
  double rate_;
};

}  // namespace loomix
