#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "loomix/estimators.hpp"
#include "loomix/math.hpp"

namespace loomix {

/// Generalized Pareto tail fit (shape k, scale sigma) of exceedances over a
/// threshold. valid == false is the no-fit sentinel.
struct GpdFit {
  double k = std::numeric_limits<double>::quiet_NaN();
  double sigma = std::numeric_limits<double>::quiet_NaN();
  int n_tail = 0;
  bool valid = false;
};

/// Quantile of the GPD with location 0: sigma/k ((1-p)^{-k} - 1), the
/// exponential limit at k = 0.
inline double gpd_quantile(double p, double k, double sigma) {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
  return sigma / k * std::expm1(-k * std::log1p(-p));
}

/// Profile-likelihood fit of the generalized Pareto shape and scale
/// (Zhang-Stephens estimator: quadrature over the profile posterior on a
/// deterministic grid, with the usual weak prior shrinking k toward 0.5).
/// Input: positive exceedances sorted ascending, at least 5 of them.
inline GpdFit gpd_fit(const VectorXd& tail_sorted) {
  GpdFit fit;
  const Eigen::Index N = tail_sorted.size();
  fit.n_tail = static_cast<int>(N);
  if (N < 5) return fit;
  const double x_max = tail_sorted[N - 1];
  if (!(x_max > 0.0)) return fit;

  const int M = 30 + static_cast<int>(std::floor(std::sqrt(
                         static_cast<double>(N))));
  Eigen::Index q_idx =
      static_cast<Eigen::Index>(std::floor(static_cast<double>(N) / 4.0 + 0.5)) - 1;
  if (q_idx < 0) q_idx = 0;
  const double x_star = tail_sorted[q_idx];
  if (!(x_star > 0.0)) return fit;

  VectorXd theta(M), prof(M);
  for (int j = 0; j < M; ++j) {
    theta[j] = 1.0 / x_max +
               (1.0 - std::sqrt(static_cast<double>(M) / (j + 0.5))) /
                   (3.0 * x_star);
    // profile log-likelihood: N * (log(-theta/k) - k - 1), k = mean log1p(-theta x)
    const double kj = (-theta[j] * tail_sorted.array()).log1p().mean();
    prof[j] = N * (std::log(-theta[j] / kj) - kj - 1.0);
    if (!std::isfinite(prof[j])) prof[j] = kNegInf;
  }
  VectorXd w;
  softmax(prof, w);
  const double theta_hat = theta.dot(w);
  const double k = (-theta_hat * tail_sorted.array()).log1p().mean();
  fit.sigma = -k / theta_hat;
  // weakly informative prior on k, shrinking toward 0.5
  fit.k = (k * N + 0.5 * 10.0) / (N + 10.0);
  fit.valid = std::isfinite(fit.k) && std::isfinite(fit.sigma) &&
              fit.sigma > 0.0;
  return fit;
}

struct PsisResult {
  VectorXd log_weights;
  double khat = std::numeric_limits<double>::quiet_NaN();
  int n_tail = 0;
  bool smoothed = false;
};

/// Pareto smoothing of importance log-weights: the M largest weights
/// (M = min(0.2 S, 3 sqrt(S)), rounded) are replaced by expected order
/// statistics of the fitted GPD, capped at the pre-smoothing maximum.
/// Degenerate weights pass through unchanged with a NaN khat sentinel.
inline PsisResult psis_smooth(const VectorXd& log_weights) {
  const Eigen::Index S = log_weights.size();
  if (S < 25) throw ConfigError("psis_smooth: need at least 25 weights");
  PsisResult res;
  res.log_weights = log_weights;

  const Eigen::Index M = static_cast<Eigen::Index>(std::llround(
      std::min(0.2 * static_cast<double>(S),
               3.0 * std::sqrt(static_cast<double>(S)))));
  res.n_tail = static_cast<int>(M);
  if (M < 5) return res;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(S));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return log_weights[a] < log_weights[b];
  });
  const double lw_max = log_weights[order.back()];
  const double cutoff = log_weights[order[static_cast<std::size_t>(S - M - 1)]];
  if (!(lw_max > cutoff)) return res;  // flat tail, nothing to fit

  // exceedances on the weight scale, normalized by the maximum
  VectorXd exceed(M);
  const double c = std::exp(cutoff - lw_max);
  for (Eigen::Index j = 0; j < M; ++j) {
    exceed[j] =
        std::exp(log_weights[order[static_cast<std::size_t>(S - M + j)]] -
                 lw_max) -
        c;
  }
  const GpdFit fit = gpd_fit(exceed);
  if (!fit.valid) return res;
  res.khat = fit.k;

  for (Eigen::Index j = 0; j < M; ++j) {
    const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(M);
    const double q = c + gpd_quantile(p, fit.k, fit.sigma);
    double lw = std::log(q) + lw_max;
    if (lw > lw_max) lw = lw_max;  // never exceed the raw maximum
    res.log_weights[order[static_cast<std::size_t>(S - M + j)]] = lw;
  }
  res.smoothed = true;
  return res;
}

/// PSIS variant of the classical posterior estimator: the same harmonic-mean
/// weights, Pareto-smoothed per observation, with khat stored.
inline std::vector<EstimateRecord> psis_estimate(const WeightedSampleSet& ws) {
  const Eigen::Index n = ws.n_obs();
  const Eigen::Index S = ws.n_draws();
  std::vector<EstimateRecord> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    EstimateRecord& r = out[static_cast<std::size_t>(i)];
    r.index = i;
    r.method = Method::Psis;
    VectorXd lw = -ws.loglik.row(i).transpose();
    bool inf_weight = false;
    for (Eigen::Index s = 0; s < S; ++s) {
      if (lw[s] == std::numeric_limits<double>::infinity()) inf_weight = true;
    }
    if (inf_weight) {
      r.log_mu_hat = kNegInf;
      r.degenerate_weights = true;
      r.is_ess = is_ess_log(lw);
      continue;
    }
    if (S >= 25) {
      const PsisResult sm = psis_smooth(lw);
      if (sm.smoothed) {
        lw = sm.log_weights;
        r.khat = sm.khat;
      }
    }
    const VectorXd num = ws.loglik.row(i).transpose() + lw;
    r.log_mu_hat = log_sum_exp(num) - log_sum_exp(lw);
    r.is_ess = is_ess_log(lw);
  }
  return out;
}

/// Fraction of observations whose tail-shape diagnostic exceeds the
/// conventional 0.7 alarm threshold.
inline double khat_fraction(const std::vector<EstimateRecord>& records,
                            double threshold = 0.7) {
  if (records.empty()) return 0.0;
  int count = 0;
  for (const auto& r : records) {
    if (r.khat && *r.khat > threshold) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(records.size());
}

}  // namespace loomix
