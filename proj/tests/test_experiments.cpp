#include <catch2/catch.hpp>
#include <cstdio>
#include <fstream>

#include "loomix/estimate_file.hpp"
#include "loomix/experiments.hpp"
#include "loomix/result_io.hpp"

using namespace loomix;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::ofstream out(name);
  out << content;
  return name;
}

}  // namespace

TEST_CASE("config files parse sections, comments and aliases") {
  const std::string path = write_temp("loomix_cfg_test.cfg",
                                      "[experiment]\n"
                                      "design = fig2-mse-grid  # alias\n"
                                      "n = 50\n"
                                      "pn_grid = 0.5, 1, 2\n"
                                      "sigma2 = 1.5\n"
                                      "methods = posterior,mixture\n"
                                      "\n"
                                      "[output]\n"
                                      "format = csv\n"
                                      "seed = 99\n");
  ExperimentConfig cfg;
  apply_config_map(cfg, parse_config_file(path));
  REQUIRE(cfg.design == "mse-grid");
  REQUIRE(cfg.n == 50);
  REQUIRE(cfg.pn_grid == std::vector<double>{0.5, 1.0, 2.0});
  REQUIRE(cfg.sigma2 == Approx(1.5));
  REQUIRE(cfg.methods.size() == 2);
  REQUIRE(cfg.methods[1] == Method::Mixture);
  REQUIRE(cfg.format == "csv");
  REQUIRE(cfg.seed == 99);
  std::remove(path.c_str());

  const std::string bad =
      write_temp("loomix_cfg_bad.cfg", "not_a_real_key = 1\n");
  ExperimentConfig cfg2;
  REQUIRE_THROWS_AS(apply_config_map(cfg2, parse_config_file(bad)),
                    ConfigError);
  std::remove(bad.c_str());

  REQUIRE_THROWS_AS(parse_method_list("posterior,unknown"), ConfigError);
}

TEST_CASE("gen_synthetic: determinism, moments and guards") {
  const PriorSpec prior = PriorSpec::isotropic(2.0);
  const auto [m1, t1] = gen_synthetic(40, 6, 1.0, prior, 123);
  const auto [m2, t2] = gen_synthetic(40, 6, 1.0, prior, 123);
  REQUIRE(m1.data().X() == m2.data().X());
  REQUIRE(m1.data().y() == m2.data().y());
  REQUIRE(t1 == t2);
  const auto [m3, t3] = gen_synthetic(40, 6, 1.0, prior, 124);
  REQUIRE(m1.data().y() != m3.data().y());

  // CLT bound on the mean of the standard normal design entries
  const double np = 40.0 * 6.0;
  REQUIRE(m1.data().X().mean() == Approx(0.0).margin(4.0 / std::sqrt(np)));

  REQUIRE_THROWS_AS(gen_synthetic(10, 2, 0.0, prior, 1), ConfigError);
}

TEST_CASE("leverage design: skipped flat cells and reproducible output") {
  ExperimentConfig cfg;
  cfg.design = "leverage";
  cfg.n = 30;
  cfg.p_grid = {10, 40};
  cfg.n_replicates = 30;
  cfg.seed = 7;
  const ResultTable t1 = run_leverage(cfg);
  const ResultTable t2 = run_leverage(cfg);
  REQUIRE(to_json(t1, false) == to_json(t2, false));
  REQUIRE(to_csv(t1, false) == to_csv(t2, false));

  // flat cell at p=40 >= n=30 skipped with a recorded reason
  bool skipped = false;
  for (const auto& f : t1.failures) {
    if (f.find("flat") != std::string::npos &&
        f.find("p=40") != std::string::npos) {
      skipped = true;
    }
  }
  REQUIRE(skipped);
  for (const auto& row : t1.rows) {
    REQUIRE_FALSE((row.key.at("regime") == "flat" && row.key.at("p") == "40"));
    if (row.key.at("regime") == "flat" && row.key.at("p") == "10") {
      REQUIRE(row.stats.at("mean") == Approx(10.0 / 30.0).margin(0.02));
    }
  }
}

TEST_CASE("leverage spot values: flat mean at p/n = 0.5 and the scalar case") {
  // flat prior, n=100, p=50: empirical mean leverage 0.5 within 0.02
  double acc = 0.0;
  long cnt = 0;
  for (int rep = 0; rep < 200; ++rep) {
    Rng rng(derive_seed(40100, static_cast<std::uint64_t>(rep)));
    Eigen::MatrixXd X(100, 50);
    for (Eigen::Index i = 0; i < 100; ++i) {
      for (Eigen::Index j = 0; j < 50; ++j) X(i, j) = rng.normal();
    }
    acc += hat_diag(X, 1.0, PriorSpec::flat()).sum();
    cnt += 100;
  }
  REQUIRE(acc / cnt == Approx(0.5).margin(0.02));

  // p=1, single nonzero x: the scalar formula x^2/(x^2 + sigma2/nu2)
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 1);
  X(1, 0) = 2.0;
  const Eigen::VectorXd d = hat_diag(X, 2.0, PriorSpec::isotropic(0.5));
  REQUIRE(d[1] == Approx(4.0 / (4.0 + 2.0 / 0.5)));
  REQUIRE(d[0] == Approx(0.0).margin(1e-15));
}

TEST_CASE("thread count does not change the results") {
  ExperimentConfig cfg;
  cfg.design = "mse-grid";
  cfg.n = 15;
  cfg.pn_grid = {0.5, 1.5};
  cfg.S = 300;
  cfg.n_replicates = 12;
  cfg.seed = 21;
  cfg.methods = {Method::Posterior, Method::Mixture};
  cfg.threads = 1;
  const ResultTable serial = run_mse_grid(cfg);
  cfg.threads = 4;
  const ResultTable threaded = run_mse_grid(cfg);
  REQUIRE(to_json(serial, false) == to_json(threaded, false));
}

TEST_CASE("mse grid: mixture dominates the classical estimator") {
  ExperimentConfig cfg;
  cfg.design = "mse-grid";
  cfg.n = 20;
  cfg.pn_grid = {0.5, 2.0};
  cfg.prior = "scaled:100";
  cfg.S = 500;
  cfg.n_replicates = 30;
  cfg.seed = 11;
  cfg.methods = {Method::Posterior, Method::Psis, Method::Mixture};
  const ResultTable table = run_mse_grid(cfg);

  std::map<std::string, double> mse;
  for (const auto& row : table.rows) {
    mse[row.key.at("pn") + "/" + row.key.at("method")] =
        row.stats.at("mse_mean");
    if (row.key.at("method") == "psis") {
      REQUIRE(row.stats.count("khat_frac") == 1);
    }
    REQUIRE(row.stats.at("n_replicates") == 30.0);
  }
  for (const std::string pn : {"0.5", "2"}) {
    REQUIRE(mse.at(pn + "/mixture") <= mse.at(pn + "/posterior"));
  }
  // reproducibility with timing stripped
  REQUIRE(to_json(table, false) == to_json(run_mse_grid(cfg), false));
}

TEST_CASE("mse-vs-s design: slope separates mixture from the classical") {
  ExperimentConfig cfg;
  cfg.design = "mse-vs-s";
  cfg.n = 30;
  cfg.p = 30;
  cfg.prior = "iso:10";
  cfg.S_grid = {250, 1000, 4000};
  cfg.n_replicates = 30;
  cfg.seed = 13;
  cfg.methods = {Method::Posterior, Method::Mixture};
  const ResultTable table = run_mse_vs_s(cfg);
  double slope_mix = 0.0, slope_post = 0.0;
  int slope_rows = 0;
  for (const auto& row : table.rows) {
    if (row.key.at("S") == "all") {
      ++slope_rows;
      if (row.key.at("method") == "mixture") slope_mix = row.stats.at("slope");
      if (row.key.at("method") == "posterior") {
        slope_post = row.stats.at("slope");
      }
    }
  }
  REQUIRE(slope_rows == 2);
  REQUIRE(slope_mix < -0.6);       // near the S^{-1} Monte Carlo rate
  REQUIRE(slope_post > slope_mix);  // classical decays visibly slower
}

TEST_CASE("estimate-file on a conjugate CSV matches library calls bit-exactly") {
  const PriorSpec prior = PriorSpec::isotropic(100.0 / 4.0);
  const auto [model, theta] = gen_synthetic(25, 4, 1.0, prior, 31);
  const std::string csv = "loomix_test_conj.csv";
  write_csv(model.data(), csv);

  ExperimentConfig cfg;
  cfg.design = "estimate-file";
  cfg.data_path = csv;
  cfg.model = "gaussian-conjugate";
  cfg.prior = "scaled:100";
  cfg.sigma2 = 1.0;
  cfg.S = 1000;
  cfg.seed = 77;
  cfg.methods = {Method::Posterior, Method::Mixture};
  const ResultTable table = estimate_file(cfg);

  const ConjugateSolver solver(model);
  const auto rep = run_conjugate_replicate(
      solver, solver.loo_log_predictives(), cfg.methods, cfg.S, cfg.seed);
  for (const auto& row : table.rows) {
    if (row.key.at("i") == "all") continue;
    const Eigen::Index i = std::atoi(row.key.at("i").c_str());
    const Method m = method_from_name(row.key.at("method"));
    REQUIRE(row.stats.at("log_mu_hat") ==
            rep.records.at(m)[static_cast<std::size_t>(i)].log_mu_hat);
  }
  // per-obs rows plus a summary row and the psi-exact row
  REQUIRE(table.rows.size() == 2 * 25 + 2 + 1);
  std::remove(csv.c_str());
}

TEST_CASE("estimate-file logistic: truth protocol runs and caches") {
  // small logistic dataset written on the fly
  Rng rng(32);
  const Eigen::Index n = 12, p = 2;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    y[i] = rng.uniform() < sigmoid(0.3 + 0.8 * X(i, 1)) ? 1.0 : 0.0;
  }
  const std::string csv = "loomix_test_logit.csv";
  write_csv(Dataset(y, X), csv);
  const std::string cache = csv + ".truth.json";
  std::remove(cache.c_str());

  ExperimentConfig cfg;
  cfg.design = "estimate-file";
  cfg.data_path = csv;
  cfg.model = "logistic";
  cfg.S = 600;
  cfg.truth_samples = 1200;
  cfg.hmc_chains = 2;
  cfg.seed = 5;
  cfg.methods = {Method::Posterior, Method::Mixture};
  const ResultTable t1 = estimate_file(cfg);
  REQUIRE(t1.config_echo.at("truth_protocol") == "loo");  // n < 100

  std::ifstream probe(cache);
  REQUIRE(probe.good());

  // second run must reuse the cache and reproduce the table exactly
  const ResultTable t2 = estimate_file(cfg);
  REQUIRE(to_json(t1, false) == to_json(t2, false));

  int per_obs_rows = 0;
  for (const auto& row : t1.rows) {
    if (row.key.at("i") != "all") {
      ++per_obs_rows;
      REQUIRE(row.stats.count("log_mu_true") == 1);
      REQUIRE(row.stats.count("sq_error") == 1);
    }
  }
  REQUIRE(per_obs_rows == 2 * 12);
  std::remove(cache.c_str());
  std::remove(csv.c_str());
}

TEST_CASE("estimate-file guards") {
  ExperimentConfig cfg;
  cfg.design = "estimate-file";
  REQUIRE_THROWS_AS(estimate_file(cfg), ConfigError);  // no data path

  const std::string bad = write_temp("loomix_noy.csv", "resp,x1\n1,2\n");
  cfg.data_path = bad;
  REQUIRE_THROWS_AS(estimate_file(cfg), DataError);
  std::remove(bad.c_str());

  ExperimentConfig cfg2;
  cfg2.model = "logistic";
  cfg2.design = "mse-grid";
  REQUIRE_THROWS_AS(run_mse_grid(cfg2), ConfigError);
}

TEST_CASE("result writers: csv columns and timing-stripped determinism") {
  ResultTable t;
  t.seed = 3;
  ResultRow a;
  a.key = {{"design", "x"}, {"method", "mixture"}};
  a.stats = {{"mse_mean", 0.25}, {"runtime_sec", 1.23}};
  ResultRow b;
  b.key = {{"design", "x"}, {"method", "posterior"}};
  b.stats = {{"mse_mean", 0.5}, {"slope", -1.0}};
  t.rows = {a, b};
  const std::string csv = to_csv(t, false);
  REQUIRE(csv.find("runtime_sec") == std::string::npos);
  REQUIRE(csv.find("mse_mean") != std::string::npos);
  REQUIRE(csv.find("slope") != std::string::npos);
  const std::string json = to_json(t, true);
  REQUIRE(json.find("runtime_sec") != std::string::npos);
  REQUIRE(json.find("\"seed\": 3") != std::string::npos);
  REQUIRE(json.find("config_echo") != std::string::npos);
  REQUIRE(json.find("versions") != std::string::npos);
}

TEST_CASE("estimator stage scales linearly in n") {
  // doubling n at fixed S must not much more than double the wall time
  Rng rng(33);
  const Eigen::Index S = 20000;
  const auto time_mixture_estimate = [&](Eigen::Index n) {
    Eigen::MatrixXd ll(n, S);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index s = 0; s < S; ++s) ll(i, s) = -1.0 - rng.uniform();
    }
    WeightedSampleSet ws;
    ws.loglik = std::move(ll);
    ws.thetas = Eigen::MatrixXd::Zero(1, S);
    ws.source = TargetKind::Mixture;
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto est = mixture_estimate(ws);
      best = std::min(
          best, std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count() +
                    0.0 * est.pi_hat[0]);
    }
    return best;
  };
  const double t1 = time_mixture_estimate(200);
  const double t2 = time_mixture_estimate(400);
  REQUIRE(t2 <= 2.5 * t1 + 1e-3);
}
