#include <catch2/catch.hpp>
#include <cmath>

#include "loomix/glm.hpp"
#include "oracles.hpp"

using namespace loomix;

namespace {

LogisticModel random_logistic(Eigen::Index n, Eigen::Index p,
                              std::uint64_t seed, CoefPrior prior) {
  Rng rng(seed);
  Eigen::MatrixXd X = oracles::random_matrix(n, p, rng);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return LogisticModel(Dataset(y, X), std::move(prior));
}

}  // namespace

TEST_CASE("logistic log-likelihood at a zero row is log(1/2)") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 2);
  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  const LogisticModel m(Dataset(y, X), CoefPrior::gaussian(1.0));
  Eigen::VectorXd theta(2);
  theta << 3.0, -1.0;
  REQUIRE(m.log_lik_term(0, theta) == Approx(std::log(0.5)));
  REQUIRE(m.log_lik_term(1, theta) == Approx(std::log(0.5)));
}

TEST_CASE("logistic tails follow the softplus asymptote without overflow") {
  Eigen::MatrixXd X(1, 1);
  X << 1.0;
  Eigen::VectorXd y(1);
  y << 1.0;
  const LogisticModel m(Dataset(y, X), CoefPrior::gaussian(1.0));
  Eigen::VectorXd theta(1);
  theta << -500.0;
  const double v = m.log_lik_term(0, theta);
  REQUIRE(std::isfinite(v));
  REQUIRE(v == Approx(-500.0));
  theta << 500.0;
  REQUIRE(m.log_lik_term(0, theta) == Approx(0.0).margin(1e-12));
}

TEST_CASE("bernoulli log-masses never exceed zero") {
  const auto m = random_logistic(20, 3, 70, CoefPrior::gaussian(4.0));
  Rng rng(71);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd theta = 2.0 * oracles::random_vector(3, rng);
    Eigen::VectorXd ell;
    m.log_lik_terms(theta, ell);
    REQUIRE((ell.array() <= 0.0).all());
  }
}

TEST_CASE("logistic gradients match finite differences") {
  const auto m = random_logistic(12, 3, 72, CoefPrior::gaussian(2.0));
  Rng rng(73);
  for (int t = 0; t < 5; ++t) {
    const Eigen::VectorXd theta = oracles::random_vector(3, rng);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const Eigen::VectorXd fd = oracles::fd_gradient(
          [&](const Eigen::VectorXd& th) { return m.log_lik_term(i, th); },
          theta);
      REQUIRE(oracles::max_rel_error(m.grad_log_lik_term(i, theta), fd) < 1e-5);
    }
  }
}

TEST_CASE("laplace prior density and variance convention") {
  const CoefPrior p1 = CoefPrior::laplace(1.0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  REQUIRE(p1.logpdf(zero) == Approx(-std::log(2.0)));

  // b = sqrt(50/p) gives per-coordinate variance 2 b^2 = 100/p
  const Eigen::Index p = 8;
  const CoefPrior lp = CoefPrior::laplace(std::sqrt(50.0 / p));
  REQUIRE(2.0 * lp.laplace_scale * lp.laplace_scale ==
          Approx(100.0 / static_cast<double>(p)));
  const CoefPrior lv = CoefPrior::laplace_with_variance(100.0 / p);
  REQUIRE(lv.laplace_scale == Approx(std::sqrt(50.0 / p)));

  Rng rng(74);
  double s2 = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double d = lp.draw_coord(0, rng);
    s2 += d * d;
  }
  REQUIRE(s2 / N == Approx(100.0 / p).epsilon(0.03));
}

TEST_CASE("laplace prior gradient away from the kink, sign(0) = 0") {
  const CoefPrior lp = CoefPrior::laplace(0.7);
  Eigen::VectorXd theta(3);
  theta << 1.3, -0.4, 2.0;
  const Eigen::VectorXd fd = oracles::fd_gradient(
      [&](const Eigen::VectorXd& th) { return lp.logpdf(th); }, theta);
  REQUIRE(oracles::max_rel_error(lp.grad(theta), fd) < 1e-5);
  theta << 0.0, 1.0, -1.0;
  REQUIRE(lp.grad(theta)[0] == 0.0);
}

TEST_CASE("logistic model is permutation-equivariant in observation index") {
  Rng rng(75);
  Eigen::MatrixXd X = oracles::random_matrix(5, 2, rng);
  Eigen::VectorXd y(5);
  y << 1.0, 0.0, 1.0, 1.0, 0.0;
  const LogisticModel m(Dataset(y, X), CoefPrior::gaussian(1.0));

  std::vector<int> perm = {4, 2, 0, 1, 3};
  Eigen::MatrixXd Xp(5, 2);
  Eigen::VectorXd yp(5);
  for (int i = 0; i < 5; ++i) {
    Xp.row(i) = X.row(perm[static_cast<std::size_t>(i)]);
    yp[i] = y[perm[static_cast<std::size_t>(i)]];
  }
  const LogisticModel mp(Dataset(yp, Xp), CoefPrior::gaussian(1.0));
  const Eigen::VectorXd theta = oracles::random_vector(2, rng);
  for (int i = 0; i < 5; ++i) {
    REQUIRE(mp.log_lik_term(i, theta) ==
            Approx(m.log_lik_term(perm[static_cast<std::size_t>(i)], theta)));
  }
}

TEST_CASE("logistic rejects non-binary responses") {
  Eigen::MatrixXd X(2, 1);
  X << 1.0, 2.0;
  Eigen::VectorXd y(2);
  y << 0.0, 2.0;
  REQUIRE_THROWS_AS(LogisticModel(Dataset(y, X), CoefPrior::gaussian(1.0)),
                    DataError);
}

TEST_CASE("unknown-noise model: gradients and the log-scale Jacobian") {
  Rng rng(76);
  Eigen::MatrixXd X = oracles::random_matrix(10, 2, rng);
  Eigen::VectorXd y = oracles::random_vector(10, rng);
  const GaussianUnknownNoiseModel m(Dataset(y, X),
                                    CoefPrior::laplace_with_variance(4.0),
                                    4.0, 6.0);
  REQUIRE(m.dim() == 3);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd theta = oracles::random_vector(3, rng);
    theta[2] = 0.5 * theta[2];  // keep lambda in a sane range
    const Eigen::VectorXd fd_prior = oracles::fd_gradient(
        [&](const Eigen::VectorXd& th) { return m.log_prior(th); }, theta);
    REQUIRE(oracles::max_rel_error(m.grad_log_prior(theta), fd_prior) < 1e-5);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const Eigen::VectorXd fd = oracles::fd_gradient(
          [&](const Eigen::VectorXd& th) { return m.log_lik_term(i, th); },
          theta);
      REQUIRE(oracles::max_rel_error(m.grad_log_lik_term(i, theta), fd) < 1e-5);
    }
    Eigen::VectorXd ell;
    m.log_lik_terms(theta, ell);
    for (Eigen::Index i = 0; i < 10; ++i) {
      REQUIRE(ell[i] == Approx(m.log_lik_term(i, theta)).epsilon(1e-13));
    }
    Eigen::VectorXd v = oracles::random_vector(10, rng).array().abs();
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(3);
    for (Eigen::Index i = 0; i < 10; ++i) {
      direct += v[i] * m.grad_log_lik_term(i, theta);
    }
    REQUIRE((m.weighted_grad_loglik(theta, v) - direct).norm() < 1e-10);
  }
}

TEST_CASE("unknown-noise prior draws match inverse-gamma moments") {
  Rng rng(77);
  Eigen::MatrixXd X = oracles::random_matrix(4, 1, rng);
  Eigen::VectorXd y = oracles::random_vector(4, rng);
  const GaussianUnknownNoiseModel m(Dataset(y, X), CoefPrior::gaussian(1.0),
                                    4.0, 6.0);
  double mean_s2 = 0.0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    mean_s2 += std::exp(m.prior_draw(rng)[1]);
  }
  // InvGamma(4, 6) mean = 6 / (4 - 1) = 2
  REQUIRE(mean_s2 / N == Approx(2.0).epsilon(0.02));
}
