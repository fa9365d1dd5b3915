#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loomix/math.hpp"
#include "loomix/rng.hpp"
#include "loomix/sample_set.hpp"

namespace loomix {

enum class Method { Loo, Posterior, Mixture, Psis, Bronze, Gold, Silver };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Loo: return "loo";
    case Method::Posterior: return "posterior";
    case Method::Mixture: return "mixture";
    case Method::Psis: return "psis";
    case Method::Bronze: return "bronze";
    case Method::Gold: return "gold";
    case Method::Silver: return "silver";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  for (Method m : {Method::Loo, Method::Posterior, Method::Mixture,
                   Method::Psis, Method::Bronze, Method::Gold, Method::Silver}) {
    if (s == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + s + "'");
}

/// Per-observation estimate of log p(y_i|y_{-i}) with diagnostics.
struct EstimateRecord {
  Eigen::Index index = 0;
  double log_mu_hat = 0.0;
  Method method = Method::Posterior;
  double is_ess = 0.0;                  // in [1, S]
  std::optional<double> khat;           // PSIS only
  std::optional<double> empirical_av;
  bool degenerate_weights = false;      // an infinite weight forced -inf
};

struct PsiEstimate {
  double value = 0.0;
  Method method = Method::Posterior;
  std::vector<EstimateRecord> per_obs;  // empty for gold/silver
  bool has_minus_inf = false;
  int discarded_samples = 0;            // silver budget remainder
};

/// Effective sample size (sum w)^2 / sum w^2 of nonnegative weights.
inline double is_ess(const VectorXd& weights) {
  double sw = 0.0, sw2 = 0.0;
  for (Eigen::Index s = 0; s < weights.size(); ++s) {
    if (weights[s] < 0.0) {
      throw std::invalid_argument("is_ess: weights must be nonnegative");
    }
    sw += weights[s];
    sw2 += weights[s] * weights[s];
  }
  if (sw == 0.0) throw std::invalid_argument("is_ess: all weights are zero");
  return sw * sw / sw2;
}

/// Same, from log-weights, computed in log space.
inline double is_ess_log(const Eigen::Ref<const VectorXd>& log_weights) {
  Eigen::Index n_inf = 0;
  for (Eigen::Index s = 0; s < log_weights.size(); ++s) {
    if (log_weights[s] == std::numeric_limits<double>::infinity()) ++n_inf;
  }
  if (n_inf > 0) return static_cast<double>(n_inf);
  const double l1 = log_sum_exp(log_weights);
  if (l1 == kNegInf) {
    throw std::invalid_argument("is_ess: all weights are zero");
  }
  const double l2 = log_sum_exp((2.0 * log_weights.array()).matrix().eval());
  return std::exp(2.0 * l1 - l2);
}

/// Brute-force estimator: sample set i holds draws from p(theta|y_{-i}) and
/// log mu_i is the log of the plain sample average of p(y_i|theta).
inline std::vector<EstimateRecord> loo_estimate(
    const std::vector<WeightedSampleSet>& per_obs_samples) {
  std::vector<EstimateRecord> out;
  out.reserve(per_obs_samples.size());
  for (std::size_t i = 0; i < per_obs_samples.size(); ++i) {
    const auto& ws = per_obs_samples[i];
    const Eigen::Index S = ws.n_draws();
    EstimateRecord r;
    r.index = static_cast<Eigen::Index>(i);
    r.method = Method::Loo;
    const VectorXd row = ws.loglik.row(static_cast<Eigen::Index>(i));
    r.log_mu_hat = log_sum_exp(row) - std::log(static_cast<double>(S));
    r.is_ess = static_cast<double>(S);  // unweighted average
    r.degenerate_weights = r.log_mu_hat == kNegInf;
    out.push_back(std::move(r));
  }
  return out;
}

/// Classical posterior importance-sampling estimator (harmonic mean):
/// log mu_i = log S - LSE_s(-l_is), with weights w proportional to
/// exp(-l_is). A vanished likelihood term gives an infinite weight; the
/// record is flagged and log mu set to -inf rather than dropping samples.
inline std::vector<EstimateRecord> posterior_estimate(
    const WeightedSampleSet& ws) {
  const Eigen::Index n = ws.n_obs();
  const Eigen::Index S = ws.n_draws();
  const double logS = std::log(static_cast<double>(S));
  std::vector<EstimateRecord> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    EstimateRecord& r = out[static_cast<std::size_t>(i)];
    r.index = i;
    r.method = Method::Posterior;
    const VectorXd lw = -ws.loglik.row(i).transpose();
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
    r.log_mu_hat = logS - log_sum_exp(lw);
    r.is_ess = is_ess_log(lw);
  }
  return out;
}

struct MixtureEstimate {
  std::vector<EstimateRecord> records;
  VectorXd pi_hat;  // implied component-probability estimates
};

/// Mixture estimator on the stable log-scale pipeline:
///   z_s   = LSE_i(-l_is + log a_i)
///   w_is  = -l_is + log a_i - z_s        (log of the component probability)
///   log mu_i = (log a_i + LSE_s(-z_s)) - LSE_s(w_is)
/// at Theta(nS) total cost. pi_hat_i = exp(LSE_s(w_is) - log S).
inline MixtureEstimate mixture_estimate(const WeightedSampleSet& ws,
                                        const VectorXd& alpha = {}) {
  const Eigen::Index n = ws.n_obs();
  const Eigen::Index S = ws.n_draws();
  VectorXd log_alpha = VectorXd::Zero(n);
  if (alpha.size() != 0) {
    if (alpha.size() != n) {
      throw ConfigError("mixture_estimate: alpha length must equal n");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(alpha[i] > 0.0)) {
        throw ConfigError("mixture_estimate: alpha entries must be positive");
      }
    }
    log_alpha = alpha.array().log();
  }

  // per-sample normalizers and log component probabilities
  VectorXd neg_z(S);           // -z_s
  MatrixXd w(n, S);            // w_is, each column sums to 1 in probability
  VectorXd col(n);
  for (Eigen::Index s = 0; s < S; ++s) {
    col = log_alpha - ws.loglik.col(s);
    Eigen::Index n_inf = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (col[i] == std::numeric_limits<double>::infinity()) ++n_inf;
    }
    if (n_inf == 0) {
      const double z = log_sum_exp(col);
      w.col(s) = col.array() - z;
      neg_z[s] = -z;
    } else {
      // vanished likelihood term(s): surviving component(s) get all the mass
      w.col(s).setConstant(kNegInf);
      const double share = -std::log(static_cast<double>(n_inf));
      for (Eigen::Index i = 0; i < n; ++i) {
        if (col[i] == std::numeric_limits<double>::infinity()) w(i, s) = share;
      }
      neg_z[s] = kNegInf;  // sample contributes zero numerator mass
    }
  }
  const double log_num = log_sum_exp(neg_z);  // z tilde, shared numerator

  MixtureEstimate out;
  out.records.resize(static_cast<std::size_t>(n));
  out.pi_hat.resize(n);
  const double logS = std::log(static_cast<double>(S));
  for (Eigen::Index i = 0; i < n; ++i) {
    EstimateRecord& r = out.records[static_cast<std::size_t>(i)];
    r.index = i;
    r.method = Method::Mixture;
    const VectorXd wi = w.row(i).transpose();
    const double log_den = log_sum_exp(wi);
    out.pi_hat[i] = std::exp(log_den - logS);
    r.log_mu_hat = (log_alpha[i] + log_num) - log_den;
    if (log_den == kNegInf) {
      r.log_mu_hat = kNegInf;
      r.degenerate_weights = true;
      r.is_ess = 1.0;
      continue;
    }
    r.is_ess = is_ess_log(wi);
  }
  return out;
}

/// Tempered-posterior estimator: draws come from
/// q_B proportional to (prod_i p(y_i|theta))^{(n-1)/n} p(theta) and the
/// unnormalized log-weight for target i is (1/n) sum_j l_js - l_is.
inline std::vector<EstimateRecord> bronze_estimate(const WeightedSampleSet& ws) {
  const Eigen::Index n = ws.n_obs();
  const Eigen::Index S = ws.n_draws();
  VectorXd col_mean(S);  // (1/n) sum_j l_js
  for (Eigen::Index s = 0; s < S; ++s) {
    col_mean[s] = ws.loglik.col(s).mean();
  }
  const double log_num = log_sum_exp(col_mean);  // shared across i
  std::vector<EstimateRecord> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    EstimateRecord& r = out[static_cast<std::size_t>(i)];
    r.index = i;
    r.method = Method::Bronze;
    const VectorXd lw = col_mean - ws.loglik.row(i).transpose();
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
    r.log_mu_hat = log_num - log_sum_exp(lw);
    r.is_ess = is_ess_log(lw);
  }
  return out;
}

/// Plug-in LOO score: sum_i log mu_hat_i.
inline PsiEstimate psi_plugin(const std::vector<EstimateRecord>& records) {
  if (records.empty()) throw ConfigError("psi_plugin: no records");
  PsiEstimate psi;
  psi.method = records.front().method;
  psi.per_obs = records;
  psi.value = 0.0;
  for (const auto& r : records) {
    if (r.method != psi.method) {
      throw ConfigError("psi_plugin: records mix methods");
    }
    if (r.log_mu_hat == kNegInf) psi.has_minus_inf = true;
    psi.value += r.log_mu_hat;
  }
  return psi;
}

namespace detail {

/// K indices sampled uniformly without replacement from {0,...,n-1}.
inline std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n,
                                                            Eigen::Index K,
                                                            Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = 0; i < K; ++i) {
    const Eigen::Index j =
        i + static_cast<Eigen::Index>(rng.uniform_int(
                static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(K));
  return idx;
}

}  // namespace detail

/// (n/K) sum_{i in I} log mu_i over K indices sampled uniformly without
/// replacement; requires the exact values.
inline PsiEstimate gold_estimate(const VectorXd& exact_log_mu, Eigen::Index K,
                                 std::uint64_t seed) {
  const Eigen::Index n = exact_log_mu.size();
  if (K < 1 || K > n) throw ConfigError("gold_estimate: need 1 <= K <= n");
  Rng rng(seed);
  const auto idx = detail::sample_without_replacement(n, K, rng);
  PsiEstimate psi;
  psi.method = Method::Gold;
  psi.value = 0.0;
  for (const auto i : idx) psi.value += exact_log_mu[i];
  psi.value *= static_cast<double>(n) / static_cast<double>(K);
  return psi;
}

/// Silver estimator: same subsample but each log mu_i comes from a separate
/// brute-force LOO run of floor(total_samples/K) draws. The sampler callback
/// returns draws from p(theta|y_{-i}); remainder samples are discarded and
/// reported.
inline PsiEstimate silver_estimate(
    Eigen::Index n, Eigen::Index K, Eigen::Index total_samples,
    std::uint64_t seed,
    const std::function<WeightedSampleSet(Eigen::Index i, Eigen::Index draws,
                                          std::uint64_t seed)>& loo_sampler) {
  if (K < 1 || K > n) throw ConfigError("silver_estimate: need 1 <= K <= n");
  if (total_samples < 2 * K) {
    throw ConfigError("silver_estimate: need total_samples >= 2K");
  }
  const Eigen::Index draws = total_samples / K;
  Rng rng(seed);
  const auto idx = detail::sample_without_replacement(n, K, rng);
  PsiEstimate psi;
  psi.method = Method::Silver;
  psi.value = 0.0;
  psi.discarded_samples = static_cast<int>(total_samples - draws * K);
  Eigen::Index pos = 0;
  for (const auto i : idx) {
    const WeightedSampleSet ws =
        loo_sampler(i, draws, derive_seed(seed, 0x51157e5ull + pos));
    const double log_mu =
        log_sum_exp(ws.loglik.row(i).transpose().eval()) -
        std::log(static_cast<double>(ws.n_draws()));
    if (log_mu == kNegInf) psi.has_minus_inf = true;
    psi.value += log_mu;
    ++pos;
  }
  psi.value *= static_cast<double>(n) / static_cast<double>(K);
  return psi;
}

struct EmpiricalAv {
  double value = 0.0;
  int n_excluded = 0;   // non-finite replicates dropped
  double bias = 0.0;    // mean of finite replicates minus true_log_mu
};

/// Delta-method estimate of the relative asymptotic variance: S times the
/// sample variance of replicate log-estimates. Non-finite replicates are
/// excluded and counted.
inline EmpiricalAv empirical_av(const VectorXd& replicate_log_estimates,
                                double S, double true_log_mu) {
  if (replicate_log_estimates.size() < 10) {
    throw ConfigError("empirical_av: need at least 10 replicates");
  }
  std::vector<double> finite;
  finite.reserve(static_cast<std::size_t>(replicate_log_estimates.size()));
  EmpiricalAv out;
  for (Eigen::Index r = 0; r < replicate_log_estimates.size(); ++r) {
    if (std::isfinite(replicate_log_estimates[r])) {
      finite.push_back(replicate_log_estimates[r]);
    } else {
      ++out.n_excluded;
    }
  }
  if (finite.size() < 2) {
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double mean = 0.0;
  for (const double v : finite) mean += v;
  mean /= static_cast<double>(finite.size());
  double var = 0.0;
  for (const double v : finite) var += (v - mean) * (v - mean);
  var /= static_cast<double>(finite.size()) - 1.0;
  out.value = S * var;
  out.bias = mean - true_log_mu;
  return out;
}

}  // namespace loomix
