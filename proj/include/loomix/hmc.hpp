#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <thread>
#include <vector>

#include "loomix/diagnostics.hpp"
#include "loomix/errors.hpp"
#include "loomix/model.hpp"
#include "loomix/rng.hpp"
#include "loomix/sample_set.hpp"

namespace loomix {

struct HmcConfig {
  int n_leapfrog = 32;       // trajectory length, jittered per iteration
  int leapfrog_min = 16;
  int leapfrog_max = 48;
  double target_accept = 0.8;
  int warmup = 500;
  int draws = 1000;
  int n_chains = 4;
  std::uint64_t seed = 0;
  enum class Init { Zero, PriorDraw, Given } init = Init::PriorDraw;
  VectorXd init_point;
  int threads = 1;
  double divergence_threshold = 1000.0;  // nats of Hamiltonian error

  void validate() const {
    if (warmup < 100) throw ConfigError("hmc: warmup must be >= 100");
    if (draws < 2) throw ConfigError("hmc: draws must be >= 2");
    if (!(target_accept > 0.5 && target_accept <= 0.99)) {
      throw ConfigError("hmc: target_accept must be in (0.5, 0.99]");
    }
    if (n_chains < 1) throw ConfigError("hmc: need at least one chain");
    if (leapfrog_min < 1 || leapfrog_max < leapfrog_min) {
      throw ConfigError("hmc: bad leapfrog range");
    }
  }
};

struct HmcResult {
  WeightedSampleSet samples;  // pooled post-warmup draws, all chains
  ChainDiagnostics diag;
  double seconds = 0.0;
};

namespace detail {

struct DualAveraging {
  double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
  double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  int m = 0;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = std::log(eps);
    h_bar = 0.0;
    m = 0;
  }
  double update(double accept_prob, double target) {
    ++m;
    h_bar += (target - accept_prob - h_bar) / (m + t0);
    log_eps = mu - std::sqrt(static_cast<double>(m)) / gamma * h_bar;
    const double eta = std::pow(static_cast<double>(m), -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
    return std::exp(log_eps);
  }
  double averaged() const { return std::exp(log_eps_bar); }
};

class HmcChain {
 public:
  HmcChain(const TargetDensity& target, const HmcConfig& cfg, int chain_index)
      : target_(target),
        cfg_(cfg),
        rng_(derive_seed(cfg.seed, static_cast<std::uint64_t>(chain_index))),
        dim_(target.model().dim()),
        inv_mass_(VectorXd::Ones(target.model().dim())) {}

  void run(MatrixXd& draws_out, double& accept_sum, int& divergences) {
    init_position();
    double eps = find_initial_step();
    da_.restart(eps);

    // 15% step-size-only, 75% windowed mass adaptation, 10% final polish
    const int w_init = std::max(1, static_cast<int>(0.15 * cfg_.warmup));
    const int w_term = std::max(1, static_cast<int>(0.10 * cfg_.warmup));
    const int w_mid_end = cfg_.warmup - w_term;
    int window = 25;
    int window_end = std::min(w_init + window, w_mid_end);
    VectorXd acc_mean = VectorXd::Zero(dim_);
    VectorXd acc_m2 = VectorXd::Zero(dim_);
    int acc_n = 0;

    for (int m = 0; m < cfg_.warmup; ++m) {
      const double ap = step(eps);
      eps = da_.update(ap, cfg_.target_accept);
      if (m >= w_init && m < w_mid_end) {
        ++acc_n;
        const VectorXd d = theta_ - acc_mean;
        acc_mean += d / acc_n;
        acc_m2 += d.cwiseProduct(theta_ - acc_mean);
        if (m + 1 == window_end) {
          if (acc_n >= 10) {
            // regularized diagonal metric, shrunk toward unit scale
            const double w = acc_n / (acc_n + 5.0);
            inv_mass_ = (w * acc_m2 / (acc_n - 1.0)).array() +
                        (1.0 - w) * 1e-3;
            eps = find_initial_step();
            da_.restart(eps);
          }
          acc_mean.setZero();
          acc_m2.setZero();
          acc_n = 0;
          // expanding windows; the last one absorbs the remainder
          window *= 2;
          window_end = (w_mid_end - window_end < 2 * window)
                           ? w_mid_end
                           : std::min(window_end + window, w_mid_end);
        }
      }
    }

    eps = da_.averaged();
    draws_out.resize(dim_, cfg_.draws);
    accept_sum = 0.0;
    divergences = 0;
    for (int s = 0; s < cfg_.draws; ++s) {
      const double ap = step(eps);
      accept_sum += ap;
      if (diverged_) ++divergences;
      draws_out.col(s) = theta_;
    }
  }

 private:
  void init_position() {
    switch (cfg_.init) {
      case HmcConfig::Init::Given:
        if (cfg_.init_point.size() != dim_) {
          throw ConfigError("hmc: init point has wrong dimension");
        }
        theta_ = cfg_.init_point;
        break;
      case HmcConfig::Init::Zero:
        theta_ = VectorXd::Zero(dim_);
        break;
      case HmcConfig::Init::PriorDraw:
        theta_ = target_.model().has_proper_prior()
                     ? target_.model().prior_draw(rng_)
                     : VectorXd::Zero(dim_);
        break;
    }
    logp_ = target_.log_density_gradient(theta_, grad_);
    if (!std::isfinite(logp_)) {
      throw NumericalError("hmc: non-finite log density at initialization");
    }
  }

  // One leapfrog trajectory with jittered length; returns the accept
  // probability and updates the chain state on acceptance.
  double step(double eps) {
    diverged_ = false;
    const int L =
        cfg_.leapfrog_min +
        static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(
            cfg_.leapfrog_max - cfg_.leapfrog_min + 1)));
    VectorXd p(dim_);
    for (Eigen::Index k = 0; k < dim_; ++k) {
      p[k] = rng_.normal() / std::sqrt(inv_mass_[k]);
    }
    const double h0 = -logp_ + 0.5 * p.dot(inv_mass_.cwiseProduct(p));

    VectorXd theta = theta_;
    VectorXd grad = grad_;
    double logp = logp_;
    bool finite = true;
    for (int l = 0; l < L; ++l) {
      p += 0.5 * eps * grad;
      theta += eps * inv_mass_.cwiseProduct(p);
      logp = target_.log_density_gradient(theta, grad);
      if (!std::isfinite(logp) || !grad.allFinite()) {
        finite = false;
        break;
      }
      p += 0.5 * eps * grad;
    }
    double accept = 0.0;
    if (finite) {
      const double h1 = -logp + 0.5 * p.dot(inv_mass_.cwiseProduct(p));
      const double dh = h1 - h0;
      if (!std::isfinite(dh) || dh > cfg_.divergence_threshold) {
        diverged_ = true;
      } else {
        accept = dh < 0.0 ? 1.0 : std::exp(-dh);
        if (rng_.uniform() < accept) {
          theta_ = theta;
          grad_ = grad;
          logp_ = logp;
        }
      }
    } else {
      diverged_ = true;
    }
    return accept;
  }

  // Double/halve until the one-step accept probability crosses 0.5.
  double find_initial_step() {
    double eps = 0.5;
    double ap = one_step_accept(eps);
    if (!std::isfinite(ap) || ap == 0.0) {
      while ((!std::isfinite(ap) || ap == 0.0) && eps > 1e-10) {
        eps *= 0.5;
        ap = one_step_accept(eps);
      }
    }
    const bool up = ap > 0.5;
    for (int it = 0; it < 50; ++it) {
      eps *= up ? 2.0 : 0.5;
      ap = one_step_accept(eps);
      if (up ? !(ap > 0.5) : (ap > 0.5)) break;
      if (eps > 1e10 || eps < 1e-10) break;
    }
    return eps;
  }

  double one_step_accept(double eps) {
    VectorXd p(dim_);
    for (Eigen::Index k = 0; k < dim_; ++k) {
      p[k] = rng_.normal() / std::sqrt(inv_mass_[k]);
    }
    const double h0 = -logp_ + 0.5 * p.dot(inv_mass_.cwiseProduct(p));
    VectorXd theta = theta_;
    VectorXd grad = grad_;
    p += 0.5 * eps * grad;
    theta += eps * inv_mass_.cwiseProduct(p);
    const double logp = target_.log_density_gradient(theta, grad);
    if (!std::isfinite(logp) || !grad.allFinite()) return 0.0;
    p += 0.5 * eps * grad;
    const double h1 = -logp + 0.5 * p.dot(inv_mass_.cwiseProduct(p));
    return std::isfinite(h1 - h0) ? std::min(1.0, std::exp(-(h1 - h0))) : 0.0;
  }

  const TargetDensity& target_;
  const HmcConfig& cfg_;
  Rng rng_;
  Eigen::Index dim_;
  VectorXd inv_mass_;
  VectorXd theta_, grad_;
  double logp_ = 0.0;
  bool diverged_ = false;
  DualAveraging da_;
};

}  // namespace detail

/// Hamiltonian Monte Carlo over any TargetDensity: leapfrog with jittered
/// trajectory length, dual-averaging step-size adaptation toward
/// target_accept, and windowed diagonal mass adaptation. Deterministic given
/// the seed; chain c uses the derived stream (seed, c).
inline HmcResult run_hmc(const TargetDensity& target, const HmcConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int n_chains = cfg.n_chains;
  std::vector<MatrixXd> chain_draws(n_chains);
  std::vector<double> accept(n_chains, 0.0);
  std::vector<int> divs(n_chains, 0);

  const auto run_one = [&](int c) {
    detail::HmcChain chain(target, cfg, c);
    chain.run(chain_draws[c], accept[c], divs[c]);
  };
  if (cfg.threads > 1 && n_chains > 1) {
    std::vector<std::thread> pool;
    pool.reserve(n_chains);
    for (int c = 0; c < n_chains; ++c) pool.emplace_back(run_one, c);
    for (auto& t : pool) t.join();
  } else {
    for (int c = 0; c < n_chains; ++c) run_one(c);
  }

  const Eigen::Index dim = target.model().dim();
  MatrixXd pooled(dim, static_cast<Eigen::Index>(n_chains) * cfg.draws);
  for (int c = 0; c < n_chains; ++c) {
    pooled.middleCols(static_cast<Eigen::Index>(c) * cfg.draws, cfg.draws) =
        chain_draws[c];
  }

  HmcResult res;
  res.diag.accept_rate = 0.0;
  res.diag.divergence_count = 0;
  for (int c = 0; c < n_chains; ++c) {
    res.diag.accept_rate += accept[c] / (cfg.draws * n_chains);
    res.diag.divergence_count += divs[c];
  }
  res.diag.split_rhat.resize(dim);
  res.diag.ess_bulk.resize(dim);
  if (n_chains >= 2) {
    std::vector<VectorXd> per_chain(n_chains);
    for (Eigen::Index k = 0; k < dim; ++k) {
      for (int c = 0; c < n_chains; ++c) {
        per_chain[c] = chain_draws[c].row(k).transpose();
      }
      res.diag.split_rhat[k] = split_rhat(per_chain);
      res.diag.ess_bulk[k] = ess_bulk(per_chain);
    }
  } else {
    res.diag.split_rhat.setConstant(std::numeric_limits<double>::quiet_NaN());
    res.diag.ess_bulk.setConstant(std::numeric_limits<double>::quiet_NaN());
  }

  res.samples.loglik = target.model().loglik_matrix(pooled);
  res.samples.thetas = std::move(pooled);
  res.samples.source = target.kind();
  res.samples.seed = cfg.seed;
  res.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return res;
}

}  // namespace loomix
