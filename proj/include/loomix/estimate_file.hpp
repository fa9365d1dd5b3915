#pragma once

#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include "loomix/experiments.hpp"

namespace loomix {

namespace detail {

inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

struct TruthResult {
  VectorXd log_mu;
  std::string protocol = "none";  // exact | loo | mixture | none
  bool from_cache = false;
};

using ModelFactory =
    std::function<std::unique_ptr<PointwiseModel>(const Dataset&)>;

inline HmcConfig make_hmc_config(const ExperimentConfig& cfg,
                                 Eigen::Index total_draws, std::uint64_t seed,
                                 double target_accept) {
  HmcConfig h;
  h.n_chains = std::max(1, cfg.hmc_chains);
  h.draws = static_cast<int>((total_draws + h.n_chains - 1) / h.n_chains);
  // first-half-discarded convention unless overridden
  h.warmup = cfg.hmc_warmup > 0 ? cfg.hmc_warmup : std::max(200, h.draws);
  h.seed = seed;
  h.target_accept = target_accept;
  h.threads = std::min(cfg.threads, h.n_chains);
  return h;
}

/// Brute-force LOO chain for observation i: sample the posterior of the
/// reduced dataset, evaluate the held-out likelihood term on the draws.
inline WeightedSampleSet sample_loo_chain(const Dataset& data,
                                          const ModelFactory& factory,
                                          const PointwiseModel& full_model,
                                          Eigen::Index i,
                                          const ExperimentConfig& cfg,
                                          Eigen::Index total_draws,
                                          std::uint64_t seed,
                                          double target_accept) {
  const Dataset reduced = drop_row(data, i);
  const auto reduced_model = factory(reduced);
  const auto target = TargetDensity::posterior(*reduced_model);
  const HmcConfig h = make_hmc_config(cfg, total_draws, seed, target_accept);
  HmcResult res = run_hmc(target, h);
  WeightedSampleSet ws;
  ws.loglik = full_model.loglik_matrix(res.samples.thetas);
  ws.thetas = std::move(res.samples.thetas);
  ws.source = TargetKind::Posterior;
  ws.seed = seed;
  return ws;
}

/// Ground truth for non-conjugate models: per-observation long LOO chains
/// for small n, one long mixture run otherwise, cached next to the data.
inline TruthResult compute_truth(const ExperimentConfig& cfg,
                                 const Dataset& data,
                                 const ModelFactory& factory,
                                 const PointwiseModel& model,
                                 std::vector<std::string>& failures) {
  TruthResult truth;
  if (cfg.truth == "none") return truth;
  truth.protocol =
      cfg.truth == "auto" ? (data.n() < 100 ? "loo" : "mixture") : cfg.truth;

  const std::string cache_path = cfg.truth_cache.empty()
                                     ? cfg.data_path + ".truth.json"
                                     : cfg.truth_cache;
  const std::uint64_t data_hash = detail::fnv1a64_file(cfg.data_path);

  // cache hit requires every knob that shapes the truth to match
  {
    std::ifstream in(cache_path);
    if (in) {
      try {
        nlohmann::json doc = nlohmann::json::parse(in);
        if (doc.at("data_hash").get<std::uint64_t>() == data_hash &&
            doc.at("model").get<std::string>() == cfg.model &&
            doc.at("prior").get<std::string>() == cfg.prior &&
            doc.at("standardize").get<bool>() == cfg.standardize &&
            doc.at("protocol").get<std::string>() == truth.protocol &&
            doc.at("truth_samples").get<int>() == cfg.truth_samples) {
          const auto vals = doc.at("log_mu").get<std::vector<double>>();
          if (static_cast<Eigen::Index>(vals.size()) == data.n()) {
            truth.log_mu =
                Eigen::Map<const VectorXd>(vals.data(),
                                           static_cast<Eigen::Index>(vals.size()));
            truth.from_cache = true;
            return truth;
          }
        }
      } catch (const std::exception&) {
        // stale or foreign cache: recompute
      }
    }
  }

  const std::uint64_t base = derive_seed(cfg.seed, seed_tag::truth);
  truth.log_mu.resize(data.n());
  if (truth.protocol == "loo") {
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const auto ws = sample_loo_chain(
          data, factory, model, i, cfg, cfg.truth_samples,
          derive_seed(base, seed_tag::loo_base + static_cast<std::uint64_t>(i)),
          0.99);
      truth.log_mu[i] =
          log_sum_exp(ws.loglik.row(i).transpose().eval()) -
          std::log(static_cast<double>(ws.n_draws()));
    }
  } else if (truth.protocol == "mixture") {
    const auto target = TargetDensity::mixture(model);
    const HmcConfig h = make_hmc_config(cfg, cfg.truth_samples, base, 0.99);
    const HmcResult res = run_hmc(target, h);
    if (res.diag.split_rhat.size() > 0 &&
        res.diag.split_rhat.maxCoeff() > 1.05) {
      failures.push_back("truth: mixture chain split R-hat " +
                         std::to_string(res.diag.split_rhat.maxCoeff()));
    }
    const auto est = mixture_estimate(res.samples);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      truth.log_mu[i] = est.records[static_cast<std::size_t>(i)].log_mu_hat;
    }
  } else {
    throw ConfigError("unknown truth protocol '" + truth.protocol + "'");
  }

  nlohmann::json doc;
  doc["data_hash"] = data_hash;
  doc["model"] = cfg.model;
  doc["prior"] = cfg.prior;
  doc["standardize"] = cfg.standardize;
  doc["protocol"] = truth.protocol;
  doc["truth_samples"] = cfg.truth_samples;
  doc["log_mu"] =
      std::vector<double>(truth.log_mu.data(),
                          truth.log_mu.data() + truth.log_mu.size());
  std::ofstream out(cache_path);
  if (out) {
    out << doc.dump(2) << "\n";
  } else {
    failures.push_back("truth: could not write cache '" + cache_path + "'");
  }
  return truth;
}

namespace detail {

inline void emit_estimate_rows(ResultTable& table, const std::string& model,
                               const std::vector<EstimateRecord>& recs,
                               const TruthResult& truth, double seconds) {
  const char* method = method_name(recs.front().method);
  double psi = 0.0;
  bool psi_finite = true;
  double mse_sum = 0.0, mse_max = 0.0;
  int used = 0, bad = 0;
  for (const auto& r : recs) {
    ResultRow row;
    row.key = {{"design", "estimate-file"},
               {"model", model},
               {"method", method},
               {"i", std::to_string(r.index)}};
    row.stats["log_mu_hat"] = r.log_mu_hat;
    row.stats["is_ess"] = r.is_ess;
    if (r.khat) row.stats["khat"] = *r.khat;
    if (truth.protocol != "none") {
      row.stats["log_mu_true"] = truth.log_mu[r.index];
      if (std::isfinite(r.log_mu_hat)) {
        const double e = r.log_mu_hat - truth.log_mu[r.index];
        row.stats["sq_error"] = e * e;
        mse_sum += e * e;
        mse_max = std::max(mse_max, e * e);
        ++used;
      } else {
        ++bad;
      }
    }
    if (std::isfinite(r.log_mu_hat)) {
      psi += r.log_mu_hat;
    } else {
      psi_finite = false;
    }
    table.rows.push_back(std::move(row));
  }
  ResultRow summary;
  summary.key = {{"design", "estimate-file"},
                 {"model", model},
                 {"method", method},
                 {"i", "all"}};
  summary.stats["psi"] =
      psi_finite ? psi : -std::numeric_limits<double>::infinity();
  if (truth.protocol != "none" && used > 0) {
    summary.stats["mse_mean"] = mse_sum / used;
    summary.stats["mse_max"] = mse_max;
  }
  summary.stats["n_failed"] = static_cast<double>(bad);
  summary.stats["khat_frac"] = khat_fraction(recs);
  summary.stats["runtime_sec"] = seconds;
  table.rows.push_back(std::move(summary));
}

}  // namespace detail

/// Run the requested estimators on a CSV dataset. Conjugate models get exact
/// ground truth; GLM backends sample with HMC and produce truth on demand via
/// the configured long-run protocol (cached).
inline ResultTable estimate_file(const ExperimentConfig& cfg) {
  if (cfg.data_path.empty()) {
    throw ConfigError("estimate-file: --data is required");
  }
  ResultTable table;
  table.seed = cfg.seed;
  table.config_echo = config_echo(cfg);
  const Dataset raw = read_csv(cfg.data_path);
  const auto clock = [] { return std::chrono::steady_clock::now(); };
  using dsec = std::chrono::duration<double>;

  if (cfg.model == "gaussian-conjugate") {
    const Dataset data = cfg.standardize ? raw.standardized(true) : raw;
    PriorSpec prior = parse_conjugate_prior(cfg.prior, data.p());
    double sigma2 = cfg.sigma2;
    if (cfg.sigma2_mode == "eb") {
      sigma2 = empirical_bayes_sigma2(data, prior, true);
      // the conjugate scaling keeps theta | sigma2 ~ N(theta0, sigma2 Sigma)
      if (prior.kind == PriorSpec::Kind::Isotropic) prior.nu2 *= sigma2;
      if (prior.kind == PriorSpec::Kind::Full) prior.Sigma *= sigma2;
      table.config_echo["sigma2_eb"] = detail::format_double(sigma2);
    }
    const GaussianLinearModel model(data, sigma2, prior);
    const ConjugateSolver solver(model);
    TruthResult truth;
    truth.protocol = "exact";
    truth.log_mu = solver.loo_log_predictives();

    const auto rep = run_conjugate_replicate(solver, truth.log_mu, cfg.methods,
                                             cfg.S, cfg.seed, cfg.K,
                                             cfg.total_samples);
    for (const auto& [method, recs] : rep.records) {
      detail::emit_estimate_rows(table, cfg.model, recs, truth,
                                 rep.seconds.at(method));
    }
    const double psi_exact = truth.log_mu.sum();
    for (const auto& [method, psi] : rep.psi_value) {
      ResultRow row;
      row.key = {{"design", "estimate-file"},
                 {"model", cfg.model},
                 {"method", method_name(method)},
                 {"i", "all"}};
      row.stats["psi"] = psi;
      row.stats["psi_sq_error"] = (psi - psi_exact) * (psi - psi_exact);
      table.rows.push_back(std::move(row));
    }
    ResultRow exact_row;
    exact_row.key = {{"design", "estimate-file"},
                     {"model", cfg.model},
                     {"method", "exact"},
                     {"i", "all"}};
    exact_row.stats["psi"] = psi_exact;
    table.rows.push_back(std::move(exact_row));
    return table;
  }

  if (cfg.model != "logistic" && cfg.model != "gaussian-unknown-noise") {
    throw ConfigError("unknown model '" + cfg.model + "'");
  }

  // logistic responses must stay binary under standardization
  const Dataset data =
      cfg.standardize ? raw.standardized(cfg.model != "logistic") : raw;
  const std::string prior_spec =
      cfg.prior == "scaled:100" && cfg.model == "logistic"
          ? "laplace-scaled:100"  // double-exponential default for logistic
          : cfg.prior;
  const ModelFactory factory = [&](const Dataset& d)
      -> std::unique_ptr<PointwiseModel> {
    const CoefPrior cp = parse_coef_prior(prior_spec, d.p());
    if (cfg.model == "logistic") {
      return std::make_unique<LogisticModel>(d, cp);
    }
    return std::make_unique<GaussianUnknownNoiseModel>(d, cp, 4.0, 6.0);
  };
  const auto model = factory(data);

  ExperimentConfig truth_cfg = cfg;
  truth_cfg.prior = prior_spec;
  const TruthResult truth =
      compute_truth(truth_cfg, data, factory, *model, table.failures);
  if (truth.protocol != "none") {
    table.config_echo["truth_protocol"] = truth.protocol;
  }

  const auto want = [&](Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) !=
           cfg.methods.end();
  };
  const auto run_target = [&](TargetKind kind, std::uint64_t tag) {
    const TargetDensity target =
        kind == TargetKind::Posterior ? TargetDensity::posterior(*model)
        : kind == TargetKind::Mixture ? TargetDensity::mixture(*model)
                                      : TargetDensity::bronze(*model);
    const HmcConfig h = make_hmc_config(cfg, cfg.S, derive_seed(cfg.seed, tag),
                                        cfg.target_accept);
    HmcResult res = run_hmc(target, h);
    if (res.diag.split_rhat.size() > 0 &&
        res.diag.split_rhat.maxCoeff() > 1.05) {
      table.failures.push_back(std::string(target_kind_name(kind)) +
                               " chain: split R-hat " +
                               std::to_string(res.diag.split_rhat.maxCoeff()));
    }
    if (res.diag.divergence_count > 0) {
      table.failures.push_back(std::string(target_kind_name(kind)) +
                               " chain: " +
                               std::to_string(res.diag.divergence_count) +
                               " divergences");
    }
    return res;
  };

  std::optional<WeightedSampleSet> post_ws;
  double post_seconds = 0.0;
  if (want(Method::Posterior) || want(Method::Psis)) {
    HmcResult res = run_target(TargetKind::Posterior, seed_tag::posterior);
    post_seconds = res.seconds;
    post_ws = std::move(res.samples);
  }
  if (want(Method::Posterior)) {
    const auto t0 = clock();
    const auto recs = posterior_estimate(*post_ws);
    detail::emit_estimate_rows(table, cfg.model, recs, truth,
                               post_seconds + dsec(clock() - t0).count());
  }
  if (want(Method::Psis)) {
    const auto t0 = clock();
    const auto recs = psis_estimate(*post_ws);
    detail::emit_estimate_rows(table, cfg.model, recs, truth,
                               post_seconds + dsec(clock() - t0).count());
  }
  if (want(Method::Mixture)) {
    HmcResult res = run_target(TargetKind::Mixture, seed_tag::mixture);
    const auto t0 = clock();
    const auto est = mixture_estimate(res.samples);
    detail::emit_estimate_rows(table, cfg.model, est.records, truth,
                               res.seconds + dsec(clock() - t0).count());
  }
  if (want(Method::Bronze)) {
    HmcResult res = run_target(TargetKind::Bronze, seed_tag::bronze);
    const auto t0 = clock();
    const auto recs = bronze_estimate(res.samples);
    detail::emit_estimate_rows(table, cfg.model, recs, truth,
                               res.seconds + dsec(clock() - t0).count());
  }
  if (want(Method::Loo)) {
    const auto t0 = clock();
    std::vector<WeightedSampleSet> sets;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      sets.push_back(sample_loo_chain(
          data, factory, *model, i, cfg, cfg.S,
          derive_seed(cfg.seed,
                      seed_tag::loo_base + static_cast<std::uint64_t>(i)),
          cfg.target_accept));
    }
    const auto recs = loo_estimate(sets);
    detail::emit_estimate_rows(table, cfg.model, recs, truth,
                               dsec(clock() - t0).count());
  }
  const Eigen::Index k_eff = cfg.K > 0 ? cfg.K : data.n();
  if (want(Method::Gold)) {
    if (truth.protocol == "none") {
      table.failures.push_back("gold: needs ground truth (truth != none)");
    } else {
      const auto psi = gold_estimate(truth.log_mu, k_eff,
                                     derive_seed(cfg.seed, seed_tag::gold));
      ResultRow row;
      row.key = {{"design", "estimate-file"},
                 {"model", cfg.model},
                 {"method", "gold"},
                 {"i", "all"}};
      row.stats["psi"] = psi.value;
      row.stats["psi_sq_error"] =
          std::pow(psi.value - truth.log_mu.sum(), 2);
      table.rows.push_back(std::move(row));
    }
  }
  if (want(Method::Silver)) {
    const auto sampler = [&](Eigen::Index i, Eigen::Index draws,
                             std::uint64_t s) {
      return sample_loo_chain(data, factory, *model, i, cfg, draws, s,
                              cfg.target_accept);
    };
    const auto psi =
        silver_estimate(data.n(), k_eff, cfg.total_samples,
                        derive_seed(cfg.seed, seed_tag::silver), sampler);
    ResultRow row;
    row.key = {{"design", "estimate-file"},
               {"model", cfg.model},
               {"method", "silver"},
               {"i", "all"}};
    row.stats["psi"] = psi.value;
    if (truth.protocol != "none") {
      row.stats["psi_sq_error"] = std::pow(psi.value - truth.log_mu.sum(), 2);
    }
    row.stats["discarded_samples"] =
        static_cast<double>(psi.discarded_samples);
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// Design dispatch for the `experiment` subcommand.
inline ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.design == "leverage") return run_leverage(cfg);
  if (cfg.design == "mse-grid") return run_mse_grid(cfg);
  if (cfg.design == "mse-vs-s") return run_mse_vs_s(cfg);
  if (cfg.design == "estimate-file") return estimate_file(cfg);
  throw ConfigError("unknown design '" + cfg.design + "'");
}

}  // namespace loomix
