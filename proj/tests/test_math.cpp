#include <catch2/catch.hpp>

#include "loomix/math.hpp"
#include "loomix/rng.hpp"

using namespace loomix;

TEST_CASE("log_sum_exp basics") {
  Eigen::VectorXd x(3);
  x << 0.0, 0.0, 0.0;
  REQUIRE(log_sum_exp(x) == Approx(std::log(3.0)));

  x << 1000.0, 1000.0, 1000.0;  // no overflow with the max subtracted
  REQUIRE(log_sum_exp(x) == Approx(1000.0 + std::log(3.0)));

  x << -1000.0, -1001.0, -1002.0;
  const double direct = std::log(std::exp(0.0) + std::exp(-1.0) + std::exp(-2.0));
  REQUIRE(log_sum_exp(x) == Approx(-1000.0 + direct));
}

TEST_CASE("log_sum_exp drops -inf terms") {
  Eigen::VectorXd x(3);
  x << kNegInf, 0.0, kNegInf;
  REQUIRE(log_sum_exp(x) == Approx(0.0));

  x << kNegInf, kNegInf, kNegInf;
  REQUIRE(log_sum_exp(x) == kNegInf);
}

TEST_CASE("pairwise log_sum_exp") {
  REQUIRE(log_sum_exp(std::log(2.0), std::log(3.0)) == Approx(std::log(5.0)));
  REQUIRE(log_sum_exp(kNegInf, 1.5) == Approx(1.5));
}

TEST_CASE("softplus and sigmoid stay finite in the tails") {
  REQUIRE(softplus(800.0) == Approx(800.0));
  REQUIRE(softplus(-800.0) == Approx(0.0).margin(1e-300));
  REQUIRE(std::isfinite(softplus(-800.0)));
  REQUIRE(sigmoid(0.0) == Approx(0.5));
  REQUIRE(sigmoid(-800.0) >= 0.0);
  REQUIRE(sigmoid(800.0) == Approx(1.0));
}

TEST_CASE("softmax normalizes and zeroes -inf entries") {
  Eigen::VectorXd x(3), w;
  x << std::log(1.0), std::log(3.0), kNegInf;
  softmax(x, w);
  REQUIRE(w.sum() == Approx(1.0));
  REQUIRE(w[0] == Approx(0.25));
  REQUIRE(w[1] == Approx(0.75));
  REQUIRE(w[2] == 0.0);
}

TEST_CASE("normal_quantile inverts the normal CDF") {
  for (double p : {0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999}) {
    const double z = normal_quantile(p);
    const double back = 0.5 * std::erfc(-z / std::sqrt(2.0));
    REQUIRE(back == Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("ols_slope on an exact line") {
  Eigen::VectorXd x(4), y(4);
  x << 1.0, 2.0, 3.0, 4.0;
  y = 2.5 * x.array() - 1.0;
  REQUIRE(ols_slope(x, y) == Approx(2.5));
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.normal() == b.normal());
    REQUIRE(a.uniform() == b.uniform());
  }
  REQUIRE(derive_seed(7, 0) != derive_seed(7, 1));
  REQUIRE(derive_seed(7, 0) != derive_seed(8, 0));
}

TEST_CASE("rng moments are sane") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  REQUIRE(sum / n == Approx(0.0).margin(4.0 / std::sqrt(double(n))));
  REQUIRE(sum2 / n == Approx(1.0).margin(0.02));

  double gsum = 0.0;
  const double shape = 3.0;
  for (int i = 0; i < n; ++i) gsum += rng.gamma(shape);
  REQUIRE(gsum / n == Approx(shape).margin(0.05));
}
