#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "loomix/errors.hpp"
#include "loomix/math.hpp"
#include "loomix/rng.hpp"

namespace loomix {

/// A Bayesian model with conditionally independent observations: a log-prior
/// and n per-observation log-likelihood terms, with analytic gradients.
///
/// Likelihood terms must be bounded above: log_lik_term is finite or -inf for
/// every finite theta, never +inf. Implementations are immutable and pure;
/// all evaluations are safe to call concurrently.
class PointwiseModel {
 public:
  virtual ~PointwiseModel() = default;

  virtual Eigen::Index n_obs() const = 0;
  virtual Eigen::Index dim() const = 0;

  virtual double log_prior(const VectorXd& theta) const = 0;
  virtual VectorXd grad_log_prior(const VectorXd& theta) const = 0;
  virtual double log_lik_term(Eigen::Index i, const VectorXd& theta) const = 0;
  virtual VectorXd grad_log_lik_term(Eigen::Index i,
                                     const VectorXd& theta) const = 0;

  /// All n log-likelihood terms at once. Overridable for vectorized backends.
  virtual void log_lik_terms(const VectorXd& theta, VectorXd& out) const {
    out.resize(n_obs());
    for (Eigen::Index i = 0; i < n_obs(); ++i) out[i] = log_lik_term(i, theta);
  }

  /// sum_i v_i * grad log p(y_i|theta). The Theta(n) building block for
  /// target-density gradients; linear-predictor backends override with a
  /// single X^T product.
  virtual VectorXd weighted_grad_loglik(const VectorXd& theta,
                                        const VectorXd& v) const {
    VectorXd g = VectorXd::Zero(dim());
    for (Eigen::Index i = 0; i < n_obs(); ++i) {
      if (v[i] != 0.0) g += v[i] * grad_log_lik_term(i, theta);
    }
    return g;
  }

  /// n x S matrix of log-likelihood terms for a dim x S block of draws.
  virtual MatrixXd loglik_matrix(const MatrixXd& thetas) const {
    MatrixXd out(n_obs(), thetas.cols());
    VectorXd col;
    for (Eigen::Index s = 0; s < thetas.cols(); ++s) {
      log_lik_terms(thetas.col(s), col);
      out.col(s) = col;
    }
    return out;
  }

  virtual bool has_proper_prior() const { return true; }

  /// Draw from the prior (used to initialize samplers). Improper priors
  /// return the zero vector.
  virtual VectorXd prior_draw(Rng& rng) const {
    (void)rng;
    return VectorXd::Zero(dim());
  }
};

enum class TargetKind { Posterior, Mixture, Bronze };

inline const char* target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::Posterior: return "posterior";
    case TargetKind::Mixture: return "mixture";
    case TargetKind::Bronze: return "bronze";
  }
  return "?";
}

/// A sampleable unnormalized log-density derived from a PointwiseModel:
/// the full posterior, the alpha-weighted mixture of LOO posteriors, or the
/// bronze tempered posterior.
///
/// Mixture:  log q(theta) = log p(theta) + sum_i l_i + LSE_i(-l_i + log a_i)
/// Bronze:   log q(theta) = log p(theta) + ((n-1)/n) sum_i l_i
/// both up to additive constants. Evaluation costs Theta(n) per call.
class TargetDensity {
 public:
  static TargetDensity posterior(const PointwiseModel& m) {
    return TargetDensity(m, TargetKind::Posterior, VectorXd());
  }

  /// alpha empty means the default uniform weights (all ones).
  static TargetDensity mixture(const PointwiseModel& m,
                               VectorXd alpha = VectorXd()) {
    if (alpha.size() != 0) {
      if (alpha.size() != m.n_obs()) {
        throw ConfigError("mixture target: alpha length must equal n");
      }
      for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) {
          throw ConfigError("mixture target: alpha entries must be in (0,inf)");
        }
      }
    }
    return TargetDensity(m, TargetKind::Mixture, std::move(alpha));
  }

  static TargetDensity bronze(const PointwiseModel& m) {
    return TargetDensity(m, TargetKind::Bronze, VectorXd());
  }

  const PointwiseModel& model() const { return *model_; }
  TargetKind kind() const { return kind_; }

  /// log alpha, materialized as zeros for the uniform default.
  VectorXd log_alpha() const {
    if (alpha_.size() == 0) return VectorXd::Zero(model_->n_obs());
    return alpha_.array().log();
  }

  double log_density(const VectorXd& theta) const {
    VectorXd ell;
    return eval(theta, ell, nullptr);
  }

  VectorXd gradient(const VectorXd& theta) const {
    VectorXd grad;
    VectorXd ell;
    eval(theta, ell, &grad);
    return grad;
  }

  /// Value and gradient in one pass (one likelihood sweep); the form samplers
  /// call every leapfrog step.
  double log_density_gradient(const VectorXd& theta, VectorXd& grad) const {
    VectorXd ell;
    return eval(theta, ell, &grad);
  }

 private:
  TargetDensity(const PointwiseModel& m, TargetKind kind, VectorXd alpha)
      : model_(&m), kind_(kind), alpha_(std::move(alpha)) {}

  double eval(const VectorXd& theta, VectorXd& ell, VectorXd* grad) const {
    if (theta.size() != model_->dim()) {
      throw std::invalid_argument("target density: theta has wrong dimension");
    }
    if (!theta.allFinite()) {
      throw std::invalid_argument("target density: non-finite theta");
    }
    const Eigen::Index n = model_->n_obs();
    model_->log_lik_terms(theta, ell);

    Eigen::Index n_zero = 0;      // components with p(y_i|theta) = 0
    Eigen::Index zero_idx = -1;
    double sum_ell = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (ell[i] == kNegInf) {
        ++n_zero;
        zero_idx = i;
      } else {
        sum_ell += ell[i];
      }
    }

    switch (kind_) {
      case TargetKind::Posterior: {
        if (n_zero > 0) {
          if (grad) grad->setConstant(model_->dim(),
                                      std::numeric_limits<double>::quiet_NaN());
          return kNegInf;
        }
        const double lp = model_->log_prior(theta) + sum_ell;
        if (grad) {
          *grad = model_->grad_log_prior(theta) +
                  model_->weighted_grad_loglik(theta, VectorXd::Ones(n));
        }
        return lp;
      }
      case TargetKind::Bronze: {
        const double coef = static_cast<double>(n - 1) / static_cast<double>(n);
        if (n_zero > 0 && coef > 0.0) {
          if (grad) grad->setConstant(model_->dim(),
                                      std::numeric_limits<double>::quiet_NaN());
          return kNegInf;
        }
        const double lp = model_->log_prior(theta) + coef * sum_ell;
        if (grad) {
          *grad = model_->grad_log_prior(theta);
          if (coef > 0.0) {
            *grad += model_->weighted_grad_loglik(
                theta, VectorXd::Constant(n, coef));
          }
        }
        return lp;
      }
      case TargetKind::Mixture: {
        if (n_zero >= 2) {
          // every mixture component contains at least one vanished term
          if (grad) grad->setConstant(model_->dim(),
                                      std::numeric_limits<double>::quiet_NaN());
          return kNegInf;
        }
        const VectorXd la = log_alpha();
        if (n_zero == 1) {
          // only component zero_idx survives: log p + log a_k + sum_{j!=k} l_j
          const double lp = model_->log_prior(theta) + la[zero_idx] + sum_ell;
          if (grad) {
            VectorXd v = VectorXd::Ones(n);
            v[zero_idx] = 0.0;
            *grad = model_->grad_log_prior(theta) +
                    model_->weighted_grad_loglik(theta, v);
          }
          return lp;
        }
        VectorXd neg = la - ell;  // -l_i + log a_i
        if (grad) {
          VectorXd w;  // softmax of (-l + log a): the conditional component
          const double lse = softmax(neg, w);  // probabilities w_i(theta)
          *grad = model_->grad_log_prior(theta) +
                  model_->weighted_grad_loglik(theta, VectorXd::Ones(n) - w);
          return model_->log_prior(theta) + sum_ell + lse;
        }
        return model_->log_prior(theta) + sum_ell + log_sum_exp(neg);
      }
    }
    return kNegInf;  // unreachable
  }

  const PointwiseModel* model_;
  TargetKind kind_;
  VectorXd alpha_;
};

}  // namespace loomix
