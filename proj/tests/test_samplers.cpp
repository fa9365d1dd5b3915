#include <catch2/catch.hpp>
#include <cmath>

#include "loomix/conjugate.hpp"
#include "loomix/diagnostics.hpp"
#include "loomix/glm.hpp"
#include "loomix/hmc.hpp"
#include "oracles.hpp"

using namespace loomix;

namespace {

/// Standard normal in d dimensions as a degenerate one-observation model.
class StdNormalTarget final : public PointwiseModel {
 public:
  explicit StdNormalTarget(Eigen::Index d) : d_(d) {}
  Eigen::Index n_obs() const override { return 1; }
  Eigen::Index dim() const override { return d_; }
  double log_prior(const VectorXd& t) const override {
    return -0.5 * t.squaredNorm();
  }
  VectorXd grad_log_prior(const VectorXd& t) const override { return -t; }
  double log_lik_term(Eigen::Index, const VectorXd&) const override {
    return 0.0;
  }
  VectorXd grad_log_lik_term(Eigen::Index, const VectorXd&) const override {
    return VectorXd::Zero(d_);
  }
  VectorXd prior_draw(Rng& rng) const override {
    VectorXd z(d_);
    for (Eigen::Index k = 0; k < d_; ++k) z[k] = rng.normal();
    return z;
  }

 private:
  Eigen::Index d_;
};

}  // namespace

TEST_CASE("hmc recovers a 10-d standard normal") {
  const StdNormalTarget model(10);
  const auto target = TargetDensity::posterior(model);
  HmcConfig cfg;
  cfg.warmup = 500;
  cfg.draws = 1000;
  cfg.n_chains = 4;
  cfg.seed = 2024;
  const HmcResult res = run_hmc(target, cfg);

  for (Eigen::Index k = 0; k < 10; ++k) {
    const VectorXd row = res.samples.thetas.row(k).transpose();
    const double mean = row.mean();
    const double var = (row.array() - mean).square().sum() / (row.size() - 1);
    const double se = std::sqrt(var / res.diag.ess_bulk[k]);
    REQUIRE(mean == Approx(0.0).margin(4.0 * se));
    REQUIRE(var == Approx(1.0).epsilon(0.10));
  }
  REQUIRE(res.diag.divergence_count == 0);
}

TEST_CASE("hmc matches the conjugate posterior") {
  Rng rng(80);
  const Eigen::MatrixXd X = oracles::random_matrix(30, 5, rng);
  const Eigen::VectorXd y = oracles::random_vector(30, rng);
  const GaussianLinearModel m(Dataset(y, X), 1.0, PriorSpec::isotropic(4.0));
  const ConjugateSolver solver(m);
  const GaussianLinearPointwise pw(m);
  const auto target = TargetDensity::posterior(pw);

  HmcConfig cfg;
  cfg.warmup = 500;
  cfg.draws = 1000;
  cfg.n_chains = 4;
  cfg.seed = 99;
  const HmcResult res = run_hmc(target, cfg);

  const Eigen::MatrixXd cov = (solver.full_posterior().prec_chol *
                               solver.full_posterior().prec_chol.transpose())
                                  .inverse();
  for (Eigen::Index k = 0; k < 5; ++k) {
    const double mean = res.samples.thetas.row(k).mean();
    const double se = std::sqrt(cov(k, k) / res.diag.ess_bulk[k]);
    REQUIRE(mean == Approx(solver.full_posterior().mean[k]).margin(4.0 * se));
    REQUIRE(res.diag.split_rhat[k] < 1.01);
  }
}

TEST_CASE("hmc is deterministic given the seed") {
  const StdNormalTarget model(3);
  const auto target = TargetDensity::posterior(model);
  HmcConfig cfg;
  cfg.warmup = 150;
  cfg.draws = 50;
  cfg.n_chains = 2;
  cfg.seed = 7;
  const HmcResult a = run_hmc(target, cfg);
  const HmcResult b = run_hmc(target, cfg);
  REQUIRE(a.samples.thetas == b.samples.thetas);
  REQUIRE(a.diag.divergence_count == b.diag.divergence_count);
}

TEST_CASE("hmc validates its configuration") {
  const StdNormalTarget model(2);
  const auto target = TargetDensity::posterior(model);
  HmcConfig cfg;
  cfg.warmup = 10;
  REQUIRE_THROWS_AS(run_hmc(target, cfg), ConfigError);
  cfg.warmup = 200;
  cfg.target_accept = 0.3;
  REQUIRE_THROWS_AS(run_hmc(target, cfg), ConfigError);
  cfg.target_accept = 0.8;
  cfg.draws = 1;
  REQUIRE_THROWS_AS(run_hmc(target, cfg), ConfigError);
}

TEST_CASE("leapfrog energy error shrinks quadratically with the step size") {
  // single trajectory on a Gaussian target, integrated by hand
  const StdNormalTarget model(4);
  const auto target = TargetDensity::posterior(model);
  Rng rng(81);
  const VectorXd theta0 = oracles::random_vector(4, rng);
  VectorXd p0 = oracles::random_vector(4, rng);

  const auto energy_error = [&](double eps, int L) {
    VectorXd theta = theta0, p = p0, grad;
    double logp = target.log_density_gradient(theta, grad);
    const double h0 = -logp + 0.5 * p.squaredNorm();
    for (int l = 0; l < L; ++l) {
      p += 0.5 * eps * grad;
      theta += eps * p;
      logp = target.log_density_gradient(theta, grad);
      p += 0.5 * eps * grad;
    }
    return std::abs(-logp + 0.5 * p.squaredNorm() - h0);
  };

  // same trajectory time T = eps * L, step halved
  const double e1 = energy_error(0.2, 10);
  const double e2 = energy_error(0.1, 20);
  REQUIRE(e1 / e2 >= 3.5);

  // acceptance -> 1 as the step vanishes
  const double tiny = energy_error(0.01, 200);
  REQUIRE(std::exp(-tiny) > 0.999);
}

TEST_CASE("adaptation steers the acceptance rate toward the target") {
  const StdNormalTarget model(6);
  const auto target = TargetDensity::posterior(model);
  HmcConfig cfg;
  cfg.warmup = 600;
  cfg.draws = 600;
  cfg.n_chains = 2;
  cfg.seed = 31;
  cfg.target_accept = 0.8;
  const HmcResult res = run_hmc(target, cfg);
  REQUIRE(res.diag.accept_rate > 0.6);
  REQUIRE(res.diag.accept_rate <= 1.0);
}

TEST_CASE("split R-hat and bulk ESS behave on reference inputs") {
  // identical constant chains: sentinel
  std::vector<VectorXd> constant(4, VectorXd::Constant(100, 3.14));
  REQUIRE(std::isnan(split_rhat(constant)));

  // i.i.d. normal draws, 4 x 1000: R-hat < 1.01, healthy ESS
  Rng rng(82);
  std::vector<VectorXd> chains;
  for (int c = 0; c < 4; ++c) {
    chains.push_back(oracles::random_vector(1000, rng));
  }
  REQUIRE(split_rhat(chains) < 1.01);
  const double ess = ess_bulk(chains);
  REQUIRE(ess > 1000.0);
  REQUIRE(ess <= 4000.0);

  // one chain offset by +10: clear mixing failure
  chains[0].array() += 10.0;
  REQUIRE(split_rhat(chains) > 1.5);

  // preconditions
  std::vector<VectorXd> one_chain = {oracles::random_vector(100, rng)};
  REQUIRE_THROWS_AS(split_rhat(one_chain), ConfigError);
  std::vector<VectorXd> too_short(4, VectorXd::Constant(4, 1.0));
  REQUIRE_THROWS_AS(split_rhat(too_short), ConfigError);
}

TEST_CASE("hmc with prior-draw initialization handles laplace priors") {
  // smoke test across the non-smooth prior gradient
  Rng rng(83);
  const Eigen::MatrixXd X = oracles::random_matrix(20, 3, rng);
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < 20; ++i) y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const LogisticModel m(Dataset(y, X),
                        CoefPrior::laplace(std::sqrt(50.0 / 3.0)));
  const auto target = TargetDensity::mixture(m);
  HmcConfig cfg;
  cfg.warmup = 400;
  cfg.draws = 400;
  cfg.n_chains = 2;
  cfg.seed = 5;
  const HmcResult res = run_hmc(target, cfg);
  REQUIRE(res.samples.thetas.allFinite());
  REQUIRE(res.diag.split_rhat.maxCoeff() < 1.1);
}

TEST_CASE("sampling the mixture costs within 2.5x of the posterior") {
  Rng rng(84);
  const Eigen::Index n = 200, p = 20;
  const Eigen::MatrixXd X = oracles::random_matrix(n, p, rng);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const LogisticModel m(Dataset(y, X), CoefPrior::gaussian(1.0));

  HmcConfig cfg;
  cfg.warmup = 300;
  cfg.draws = 500;
  cfg.n_chains = 1;
  cfg.seed = 11;

  // warm both code paths once, then time best-of-3
  double t_post = std::numeric_limits<double>::infinity();
  double t_mix = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 3; ++rep) {
    t_post = std::min(t_post,
                      run_hmc(TargetDensity::posterior(m), cfg).seconds);
    t_mix =
        std::min(t_mix, run_hmc(TargetDensity::mixture(m), cfg).seconds);
  }
  REQUIRE(t_mix <= 2.5 * t_post);
}
