// loomix command-line harness: leverage censuses, synthetic data generation,
// per-dataset estimation and config-driven experiment designs.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numerical failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "loomix/loomix.hpp"

namespace {

using loomix::ExperimentConfig;

struct CliOverrides {
  std::string config_path;
  std::string seed_str;
  std::string methods;
  std::string model;
  std::string data;
  std::string out;
  std::string format;
  std::string prior;
  std::string sigma2;
  std::string truth;
  int threads = 0;
  int S = 0;
  int n = 0;
  int p = 0;
  int replicates = 0;
  int K = 0;
  int total_samples = 0;
  int truth_samples = 0;
  bool standardize = false;
  std::string pn_grid, p_grid, s_grid;
};

void add_common_flags(CLI::App* cmd, CliOverrides& ov) {
  cmd->add_option("--config", ov.config_path, "config file (key = value)");
  cmd->add_option("--seed", ov.seed_str, "RNG seed (wins over LOOMIX_SEED)");
  cmd->add_option("--method", ov.methods,
                  "comma list: loo,posterior,mixture,psis,bronze,gold,silver");
  cmd->add_option("--model", ov.model,
                  "gaussian-conjugate | gaussian-unknown-noise | logistic");
  cmd->add_option("--data", ov.data, "input CSV (first column must be y)");
  cmd->add_option("--out", ov.out, "output path, '-' for stdout");
  cmd->add_option("--format", ov.format, "json | csv");
  cmd->add_option("--prior", ov.prior,
                  "flat | iso:<v> | scaled:<c> | laplace:<b> | "
                  "laplace-var:<v> | laplace-scaled:<c>");
  cmd->add_option("--sigma2", ov.sigma2, "noise variance, or 'eb'");
  cmd->add_option("--threads", ov.threads, "worker threads");
  cmd->add_option("--S", ov.S, "Monte Carlo sample count per estimator");
  cmd->add_option("-n,--n", ov.n, "observations (synthetic designs)");
  cmd->add_option("-p,--p", ov.p, "covariates (synthetic designs)");
  cmd->add_option("--replicates", ov.replicates, "replicate datasets");
  cmd->add_option("--K", ov.K, "gold/silver subsample size");
  cmd->add_option("--total-samples", ov.total_samples, "silver sample budget");
  cmd->add_option("--truth", ov.truth, "auto | loo | mixture | none");
  cmd->add_option("--truth-samples", ov.truth_samples,
                  "draws for the ground-truth protocol");
  cmd->add_flag("--standardize", ov.standardize,
                "center/scale columns before fitting");
  cmd->add_option("--pn-grid", ov.pn_grid, "comma list of p/n ratios");
  cmd->add_option("--p-grid", ov.p_grid, "comma list of p values");
  cmd->add_option("--s-grid", ov.s_grid, "comma list of S values");
}

// precedence: flag > LOOMIX_SEED > config file > default
ExperimentConfig build_config(const CliOverrides& ov,
                              const std::string& design) {
  ExperimentConfig cfg;
  if (!ov.config_path.empty()) {
    auto kv = loomix::parse_config_file(ov.config_path);
    loomix::apply_config_map(cfg, kv);
  }
  if (!design.empty()) cfg.design = design;
  if (const char* env = std::getenv("LOOMIX_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
  if (!ov.seed_str.empty()) {
    cfg.seed = std::strtoull(ov.seed_str.c_str(), nullptr, 10);
  }
  if (!ov.methods.empty()) cfg.methods = loomix::parse_method_list(ov.methods);
  if (!ov.model.empty()) cfg.model = ov.model;
  if (!ov.data.empty()) cfg.data_path = ov.data;
  if (!ov.out.empty()) cfg.out_path = ov.out;
  if (!ov.format.empty()) cfg.format = ov.format;
  if (!ov.prior.empty()) cfg.prior = ov.prior;
  if (!ov.sigma2.empty()) {
    if (ov.sigma2 == "eb") {
      cfg.sigma2_mode = "eb";
    } else {
      cfg.sigma2_mode = "fixed";
      cfg.sigma2 = std::strtod(ov.sigma2.c_str(), nullptr);
    }
  }
  if (!ov.truth.empty()) cfg.truth = ov.truth;
  if (ov.threads > 0) cfg.threads = ov.threads;
  if (ov.S > 0) cfg.S = ov.S;
  if (ov.n > 0) cfg.n = ov.n;
  if (ov.p > 0) cfg.p = ov.p;
  if (ov.replicates > 0) cfg.n_replicates = ov.replicates;
  if (ov.K > 0) cfg.K = ov.K;
  if (ov.total_samples > 0) cfg.total_samples = ov.total_samples;
  if (ov.truth_samples > 0) cfg.truth_samples = ov.truth_samples;
  if (ov.standardize) cfg.standardize = true;
  if (!ov.pn_grid.empty()) {
    cfg.pn_grid = loomix::parse_number_list<double>(ov.pn_grid);
  }
  if (!ov.p_grid.empty()) {
    cfg.p_grid = loomix::parse_number_list<int>(ov.p_grid);
  }
  if (!ov.s_grid.empty()) {
    cfg.S_grid = loomix::parse_number_list<int>(ov.s_grid);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "loomix: leave-one-out predictive probabilities via posterior, mixture, "
      "PSIS, bronze, gold and silver Monte Carlo estimators"};
  app.require_subcommand(1);

  CliOverrides ov;
  auto* leverage = app.add_subcommand(
      "leverage", "distribution of Bayesian leverages over random designs");
  auto* simulate = app.add_subcommand(
      "simulate", "generate a synthetic dataset CSV from the linear model");
  auto* estimate =
      app.add_subcommand("estimate", "run estimators on a CSV dataset");
  auto* experiment = app.add_subcommand(
      "experiment", "config-driven design: leverage, MSE grids, MSE vs S");
  for (auto* cmd : {leverage, simulate, estimate, experiment}) {
    add_common_flags(cmd, ov);
  }
  std::string design;
  experiment->add_option("--design", design,
                         "leverage | mse-grid | mse-vs-s | estimate-file");
  std::string theta_out;
  simulate->add_option("--theta-out", theta_out,
                       "also write the generating coefficients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (leverage->parsed()) {
      const ExperimentConfig cfg = build_config(ov, "leverage");
      cfg.validate();
      loomix::write_result(loomix::run_leverage(cfg), cfg.out_path,
                           cfg.format);
    } else if (simulate->parsed()) {
      const ExperimentConfig cfg = build_config(ov, "");
      if (cfg.p <= 0) throw loomix::ConfigError("simulate: need --p");
      if (cfg.out_path == "-" || cfg.out_path.empty()) {
        throw loomix::ConfigError("simulate: need --out for the CSV");
      }
      const auto prior = loomix::parse_conjugate_prior(cfg.prior, cfg.p);
      const auto [model, theta] =
          loomix::gen_synthetic(cfg.n, cfg.p, cfg.sigma2, prior, cfg.seed);
      loomix::write_csv(model.data(), cfg.out_path);
      if (!theta_out.empty()) {
        std::ofstream out(theta_out);
        if (!out) throw loomix::DataError("cannot write '" + theta_out + "'");
        out << "theta\n";
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
          out << loomix::detail::format_double(theta[j]) << "\n";
        }
      }
    } else if (estimate->parsed()) {
      const ExperimentConfig cfg = build_config(ov, "estimate-file");
      cfg.validate();
      loomix::write_result(loomix::estimate_file(cfg), cfg.out_path,
                           cfg.format);
    } else if (experiment->parsed()) {
      ExperimentConfig cfg = build_config(ov, "");
      if (!design.empty()) {
        loomix::apply_config_map(cfg, {{"design", design}});
      }
      loomix::write_result(loomix::run_experiment(cfg), cfg.out_path,
                           cfg.format);
    }
  } catch (const loomix::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const loomix::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const loomix::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
