#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loomix/conjugate.hpp"
#include "loomix/estimators.hpp"
#include "loomix/glm.hpp"
#include "loomix/hmc.hpp"
#include "loomix/parallel.hpp"
#include "loomix/psis.hpp"
#include "loomix/result_io.hpp"

namespace loomix {

// Fixed seed streams, shared by the harness and documented for reproduction:
// every replicate derives its own seed, and within a replicate each sampling
// target has its own sub-stream.
namespace seed_tag {
inline constexpr std::uint64_t data = 0;
inline constexpr std::uint64_t posterior = 1;
inline constexpr std::uint64_t mixture = 2;
inline constexpr std::uint64_t bronze = 3;
inline constexpr std::uint64_t gold = 4;
inline constexpr std::uint64_t silver = 5;
inline constexpr std::uint64_t truth = 6;
inline constexpr std::uint64_t loo_base = 100;
}  // namespace seed_tag

/// Prior grammar shared by the CLI and config files:
///   flat              improper flat prior (conjugate only)
///   iso:<v>           Gaussian, variance v per coordinate
///   scaled:<c>        Gaussian, variance c/p per coordinate
///   laplace:<b>       Laplace, scale b per coordinate
///   laplace-var:<v>   Laplace, variance v per coordinate
///   laplace-scaled:<c> Laplace, variance c/p per coordinate
inline PriorSpec parse_conjugate_prior(const std::string& spec,
                                       Eigen::Index p) {
  if (spec == "flat") return PriorSpec::flat();
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string head = spec.substr(0, colon);
    const double v = std::strtod(spec.c_str() + colon + 1, nullptr);
    if (head == "iso") return PriorSpec::isotropic(v);
    if (head == "scaled") {
      return PriorSpec::isotropic(v / static_cast<double>(p));
    }
  }
  throw ConfigError("prior '" + spec + "' is not valid for a Gaussian model");
}

inline CoefPrior parse_coef_prior(const std::string& spec, Eigen::Index p) {
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    const std::string head = spec.substr(0, colon);
    const double v = std::strtod(spec.c_str() + colon + 1, nullptr);
    if (head == "iso") return CoefPrior::gaussian(v);
    if (head == "scaled") {
      return CoefPrior::gaussian(v / static_cast<double>(p));
    }
    if (head == "laplace") return CoefPrior::laplace(v);
    if (head == "laplace-var") return CoefPrior::laplace_with_variance(v);
    if (head == "laplace-scaled") {
      return CoefPrior::laplace_with_variance(v / static_cast<double>(p));
    }
  }
  throw ConfigError("prior '" + spec + "' is not valid for this model");
}

struct ExperimentConfig {
  std::string design = "mse-grid";  // leverage | mse-grid | mse-vs-s | estimate-file
  int n = 100;
  int p = 0;  // 0: design default (mse-vs-s uses p = n)
  std::vector<int> p_grid;
  std::vector<double> pn_grid{0.1, 0.25, 0.5, 1.0, 2.0, 3.0};
  std::vector<int> S_grid{250, 500, 1000, 2000, 4000, 8000};
  double sigma2 = 1.0;
  std::string sigma2_mode = "fixed";  // fixed | eb
  std::string prior = "scaled:100";
  int S = 2000;
  int n_replicates = 100;
  std::vector<Method> methods{Method::Posterior, Method::Psis, Method::Mixture};
  std::uint64_t seed = 0;
  std::string data_path;
  std::string out_path = "-";
  std::string format = "json";
  std::string model = "gaussian-conjugate";
  bool standardize = false;
  int threads = 1;
  std::string truth = "auto";  // auto | loo | mixture | none
  std::string truth_cache;     // default: <data>.truth.json
  int truth_samples = 20000;
  int K = 0;  // gold/silver subsample size; 0 means n
  int total_samples = 20000;
  int hmc_chains = 4;
  int hmc_warmup = 0;  // 0: match per-chain draws
  double target_accept = 0.8;

  void validate() const {
    if (n < 1) throw ConfigError("config: n must be >= 1");
    if (n_replicates < 1) throw ConfigError("config: replicates must be >= 1");
    if (S < 2) throw ConfigError("config: S must be >= 2");
    if (methods.empty()) throw ConfigError("config: empty method list");
    if (format != "json" && format != "csv") {
      throw ConfigError("config: format must be json or csv");
    }
    if (design == "mse-grid" && pn_grid.empty()) {
      throw ConfigError("config: empty p/n grid");
    }
    if (design == "mse-vs-s" && S_grid.empty()) {
      throw ConfigError("config: empty S grid");
    }
    if (truth != "auto" && truth != "loo" && truth != "mixture" &&
        truth != "none") {
      throw ConfigError("config: truth must be auto|loo|mixture|none");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Flat key-value config files with optional [section] headers and '#'
/// comments. Section names are cosmetic; keys are global and later wins.
inline std::map<std::string, std::string> parse_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError(path + " line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + " line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    out[detail::trim(t.substr(0, eq))] = detail::trim(t.substr(eq + 1));
  }
  return out;
}

inline std::vector<Method> parse_method_list(const std::string& csv) {
  std::vector<Method> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = detail::trim(item);
    if (!t.empty()) out.push_back(method_from_name(t));
  }
  if (out.empty()) throw ConfigError("empty method list");
  return out;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& csv) {
  std::vector<T> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = detail::trim(item);
    if (t.empty()) continue;
    out.push_back(static_cast<T>(std::strtod(t.c_str(), nullptr)));
  }
  return out;
}

/// Apply parsed config-file keys onto a config. CLI flags are applied on top
/// by the caller, so the precedence is flag > LOOMIX_SEED > file > default.
inline void apply_config_map(ExperimentConfig& cfg,
                             const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "design") {
      // accept the short names and the numbered aliases
      if (value == "fig1-leverage" || value == "leverage") {
        cfg.design = "leverage";
      } else if (value == "fig2-mse-grid" || value == "mse-grid") {
        cfg.design = "mse-grid";
      } else if (value == "fig3-mse-vs-S" || value == "fig3-mse-vs-s" ||
                 value == "mse-vs-s") {
        cfg.design = "mse-vs-s";
      } else if (value == "estimate-file") {
        cfg.design = "estimate-file";
      } else {
        throw ConfigError("unknown design '" + value + "'");
      }
    } else if (key == "n") {
      cfg.n = std::atoi(value.c_str());
    } else if (key == "p") {
      cfg.p = std::atoi(value.c_str());
    } else if (key == "p_grid") {
      cfg.p_grid = parse_number_list<int>(value);
    } else if (key == "pn_grid") {
      cfg.pn_grid = parse_number_list<double>(value);
    } else if (key == "s_grid" || key == "S_grid") {
      cfg.S_grid = parse_number_list<int>(value);
    } else if (key == "sigma2") {
      if (value == "eb") {
        cfg.sigma2_mode = "eb";
      } else {
        cfg.sigma2_mode = "fixed";
        cfg.sigma2 = std::strtod(value.c_str(), nullptr);
      }
    } else if (key == "prior") {
      cfg.prior = value;
    } else if (key == "S" || key == "s") {
      cfg.S = std::atoi(value.c_str());
    } else if (key == "replicates" || key == "n_replicates") {
      cfg.n_replicates = std::atoi(value.c_str());
    } else if (key == "methods" || key == "method") {
      cfg.methods = parse_method_list(value);
    } else if (key == "seed") {
      cfg.seed = std::strtoull(value.c_str(), nullptr, 10);
    } else if (key == "data") {
      cfg.data_path = value;
    } else if (key == "out") {
      cfg.out_path = value;
    } else if (key == "format") {
      cfg.format = value;
    } else if (key == "model") {
      cfg.model = value;
    } else if (key == "standardize") {
      cfg.standardize = value == "1" || value == "true" || value == "yes";
    } else if (key == "threads") {
      cfg.threads = std::atoi(value.c_str());
    } else if (key == "truth") {
      cfg.truth = value;
    } else if (key == "truth_cache") {
      cfg.truth_cache = value;
    } else if (key == "truth_samples") {
      cfg.truth_samples = std::atoi(value.c_str());
    } else if (key == "K" || key == "k") {
      cfg.K = std::atoi(value.c_str());
    } else if (key == "total_samples") {
      cfg.total_samples = std::atoi(value.c_str());
    } else if (key == "hmc_chains") {
      cfg.hmc_chains = std::atoi(value.c_str());
    } else if (key == "hmc_warmup") {
      cfg.hmc_warmup = std::atoi(value.c_str());
    } else if (key == "target_accept") {
      cfg.target_accept = std::strtod(value.c_str(), nullptr);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

inline std::map<std::string, std::string> config_echo(
    const ExperimentConfig& cfg) {
  std::map<std::string, std::string> e;
  e["design"] = cfg.design;
  e["n"] = std::to_string(cfg.n);
  if (cfg.p > 0) e["p"] = std::to_string(cfg.p);
  e["sigma2"] = cfg.sigma2_mode == "eb" ? std::string("eb")
                                        : std::to_string(cfg.sigma2);
  e["prior"] = cfg.prior;
  e["S"] = std::to_string(cfg.S);
  e["replicates"] = std::to_string(cfg.n_replicates);
  std::string ms;
  for (const auto m : cfg.methods) {
    ms += (ms.empty() ? "" : ",") + std::string(method_name(m));
  }
  e["methods"] = ms;
  e["model"] = cfg.model;
  if (!cfg.data_path.empty()) e["data"] = cfg.data_path;
  e["seed"] = std::to_string(cfg.seed);
  return e;
}

/// Synthetic design: X with i.i.d. standard normal entries, theta drawn from
/// the prior (standard normal for the improper flat prior) and y from the
/// model likelihood. Deterministic per seed.
inline std::pair<GaussianLinearModel, VectorXd> gen_synthetic(
    Eigen::Index n, Eigen::Index p, double sigma2, const PriorSpec& prior,
    std::uint64_t seed) {
  if (!(sigma2 > 0.0)) {
    throw ConfigError("gen_synthetic: sigma2 must be positive");
  }
  if (n < 1 || p < 1) throw ConfigError("gen_synthetic: need n, p >= 1");
  Rng rng(derive_seed(seed, seed_tag::data));
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal();
  }
  VectorXd theta(p);
  if (prior.kind == PriorSpec::Kind::Isotropic) {
    const VectorXd m = prior.mean(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      theta[j] = m[j] + std::sqrt(prior.nu2) * rng.normal();
    }
  } else if (prior.kind == PriorSpec::Kind::Full) {
    const Eigen::MatrixXd L = chol_lower(prior.Sigma, "prior covariance");
    VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
    theta = prior.mean(p) + L.triangularView<Eigen::Lower>() * z;
  } else {
    // improper flat prior: fall back to standard normal coefficients
    for (Eigen::Index j = 0; j < p; ++j) theta[j] = rng.normal();
  }
  VectorXd y = X * theta;
  const double sd = std::sqrt(sigma2);
  for (Eigen::Index i = 0; i < n; ++i) y[i] += sd * rng.normal();
  return {GaussianLinearModel(Dataset(std::move(y), std::move(X)), sigma2,
                              prior),
          std::move(theta)};
}

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - std::floor(pos);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct MethodEval {
  double mse_sum = 0.0;   // per-replicate means, accumulated
  double max_sum = 0.0;   // per-replicate maxima, accumulated
  int n_reps = 0;
  int n_bad = 0;          // -inf estimates excluded
  double khat_frac_sum = 0.0;
  double seconds = 0.0;
  std::vector<double> rep_mse;  // per replicate, for slope fits
};

/// Squared-error summary of one record set against the exact values.
inline void accumulate_records(const std::vector<EstimateRecord>& recs,
                               const VectorXd& exact, MethodEval& ev) {
  double sum = 0.0, mx = 0.0;
  int used = 0;
  for (const auto& r : recs) {
    if (!std::isfinite(r.log_mu_hat)) {
      ++ev.n_bad;
      continue;
    }
    const double e = r.log_mu_hat - exact[r.index];
    sum += e * e;
    mx = std::max(mx, e * e);
    ++used;
  }
  if (used == 0) return;
  ev.mse_sum += sum / used;
  ev.max_sum += mx;
  ev.rep_mse.push_back(sum / used);
  ++ev.n_reps;
}

}  // namespace detail

/// Per-replicate estimator sweep on a conjugate instance. Produces one
/// record set per requested method from freshly drawn exact samples.
struct ConjugateReplicateResult {
  std::map<Method, std::vector<EstimateRecord>> records;
  std::map<Method, double> psi_value;  // gold/silver
  std::map<Method, double> seconds;
};

inline ConjugateReplicateResult run_conjugate_replicate(
    const ConjugateSolver& solver, const VectorXd& exact_log_mu,
    const std::vector<Method>& methods, Eigen::Index S, std::uint64_t rep_seed,
    int K = 0, int total_samples = 20000) {
  ConjugateReplicateResult out;
  const auto want = [&](Method m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
  };
  const auto clock = [] { return std::chrono::steady_clock::now(); };
  using dsec = std::chrono::duration<double>;

  std::optional<WeightedSampleSet> post_ws;
  if (want(Method::Posterior) || want(Method::Psis)) {
    post_ws = solver.sample_posterior_iid(
        S, derive_seed(rep_seed, seed_tag::posterior));
  }
  if (want(Method::Posterior)) {
    const auto t0 = clock();
    out.records[Method::Posterior] = posterior_estimate(*post_ws);
    out.seconds[Method::Posterior] = dsec(clock() - t0).count();
  }
  if (want(Method::Psis)) {
    const auto t0 = clock();
    out.records[Method::Psis] = psis_estimate(*post_ws);
    out.seconds[Method::Psis] = dsec(clock() - t0).count();
  }
  if (want(Method::Mixture)) {
    const auto t0 = clock();
    const MixtureExact mix = solver.mixture_exact();
    const auto ws =
        solver.sample_mixture_iid(mix, S, derive_seed(rep_seed, seed_tag::mixture));
    out.records[Method::Mixture] = mixture_estimate(ws).records;
    out.seconds[Method::Mixture] = dsec(clock() - t0).count();
  }
  if (want(Method::Bronze)) {
    const auto t0 = clock();
    const auto ws =
        solver.sample_bronze_iid(S, derive_seed(rep_seed, seed_tag::bronze));
    out.records[Method::Bronze] = bronze_estimate(ws);
    out.seconds[Method::Bronze] = dsec(clock() - t0).count();
  }
  if (want(Method::Loo)) {
    const auto t0 = clock();
    std::vector<WeightedSampleSet> sets;
    sets.reserve(static_cast<std::size_t>(solver.model().n()));
    for (Eigen::Index i = 0; i < solver.model().n(); ++i) {
      const GaussianDist loo = solver.loo_posterior(i);
      Rng rng(derive_seed(rep_seed, seed_tag::loo_base +
                                        static_cast<std::uint64_t>(i)));
      Eigen::MatrixXd thetas(solver.model().p(), S);
      for (Eigen::Index s = 0; s < S; ++s) thetas.col(s) = loo.sample(rng);
      WeightedSampleSet ws;
      ws.loglik = solver.loglik_matrix(thetas);
      ws.thetas = std::move(thetas);
      ws.source = TargetKind::Posterior;
      sets.push_back(std::move(ws));
    }
    out.records[Method::Loo] = loo_estimate(sets);
    out.seconds[Method::Loo] = dsec(clock() - t0).count();
  }
  const Eigen::Index n = solver.model().n();
  const Eigen::Index k_eff = K > 0 ? K : n;
  if (want(Method::Gold)) {
    out.psi_value[Method::Gold] =
        gold_estimate(exact_log_mu, k_eff, derive_seed(rep_seed, seed_tag::gold))
            .value;
  }
  if (want(Method::Silver)) {
    const auto sampler = [&](Eigen::Index i, Eigen::Index draws,
                             std::uint64_t s) {
      const GaussianDist loo = solver.loo_posterior(i);
      Rng rng(s);
      Eigen::MatrixXd thetas(solver.model().p(), draws);
      for (Eigen::Index d = 0; d < draws; ++d) thetas.col(d) = loo.sample(rng);
      WeightedSampleSet ws;
      ws.loglik = solver.loglik_matrix(thetas);
      ws.thetas = std::move(thetas);
      ws.source = TargetKind::Posterior;
      return ws;
    };
    out.psi_value[Method::Silver] =
        silver_estimate(n, k_eff, total_samples,
                        derive_seed(rep_seed, seed_tag::silver), sampler)
            .value;
  }
  return out;
}

/// Leverage census: H_ii distributions per p under the three prior regimes
/// (flat, iso:10, scaled:10). Flat cells with p >= n are skipped and the
/// reason recorded.
inline ResultTable run_leverage(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  if (c.p_grid.empty()) {
    c.p_grid = {10, 20, 50, 75, 90, 150, 300, 1000};
  }
  ResultTable table;
  table.seed = c.seed;
  table.config_echo = config_echo(c);
  struct Regime {
    std::string name;
    PriorSpec prior;
    bool flat;
  };
  const auto regimes = [&](Eigen::Index p) {
    return std::vector<Regime>{
        {"flat", PriorSpec::flat(), true},
        {"iso10", PriorSpec::isotropic(10.0), false},
        {"scaled10", PriorSpec::isotropic(10.0 / static_cast<double>(p)),
         false}};
  };
  std::uint64_t cell = 0;
  for (const int p : c.p_grid) {
    for (const auto& regime : regimes(p)) {
      ++cell;
      if (regime.flat && p >= c.n) {
        table.failures.push_back("leverage: flat prior skipped at p=" +
                                 std::to_string(p) +
                                 " (requires p < n)");
        continue;
      }
      const std::uint64_t cell_seed = derive_seed(c.seed, 1000000 + cell);
      std::vector<std::vector<double>> per_rep(
          static_cast<std::size_t>(c.n_replicates));
      parallel_for(
          static_cast<std::size_t>(c.n_replicates), c.threads,
          [&](std::size_t r) {
            Rng rng(derive_seed(cell_seed, r));
            Eigen::MatrixXd X(c.n, p);
            for (Eigen::Index i = 0; i < c.n; ++i) {
              for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal();
            }
            const VectorXd d = hat_diag(X, c.sigma2, regime.prior);
            per_rep[r].assign(d.data(), d.data() + d.size());
          });
      std::vector<double> pooled;
      pooled.reserve(static_cast<std::size_t>(c.n) * c.n_replicates);
      for (const auto& v : per_rep) pooled.insert(pooled.end(), v.begin(), v.end());
      std::sort(pooled.begin(), pooled.end());
      double mean = 0.0;
      for (const double v : pooled) mean += v;
      mean /= static_cast<double>(pooled.size());
      ResultRow row;
      row.key = {{"design", "leverage"},
                 {"regime", regime.name},
                 {"n", std::to_string(c.n)},
                 {"p", std::to_string(p)}};
      row.stats["mean"] = mean;
      row.stats["q05"] = detail::quantile_sorted(pooled, 0.05);
      row.stats["q25"] = detail::quantile_sorted(pooled, 0.25);
      row.stats["median"] = detail::quantile_sorted(pooled, 0.5);
      row.stats["q75"] = detail::quantile_sorted(pooled, 0.75);
      row.stats["q95"] = detail::quantile_sorted(pooled, 0.95);
      row.stats["n_samples"] = static_cast<double>(pooled.size());
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

namespace detail {

/// Shared cell runner for the MSE designs: replicate loop with per-method
/// accumulation, deterministic ordered reduction.
inline std::map<Method, MethodEval> run_mse_cell(
    const ExperimentConfig& cfg, Eigen::Index n, Eigen::Index p,
    Eigen::Index S, std::uint64_t cell_seed,
    std::vector<std::string>& failures, const std::string& cell_label) {
  struct RepOut {
    std::map<Method, std::vector<EstimateRecord>> records;
    std::map<Method, double> psi_value;
    std::map<Method, double> seconds;
    VectorXd exact;
    double psi_exact = 0.0;
    bool failed = false;
    std::string message;
  };
  std::vector<RepOut> reps(static_cast<std::size_t>(cfg.n_replicates));
  parallel_for(
      static_cast<std::size_t>(cfg.n_replicates), cfg.threads,
      [&](std::size_t r) {
        RepOut& out = reps[r];
        const std::uint64_t rep_seed = derive_seed(cell_seed, r);
        try {
          const PriorSpec prior = parse_conjugate_prior(cfg.prior, p);
          const auto [model, theta] =
              gen_synthetic(n, p, cfg.sigma2, prior, rep_seed);
          const ConjugateSolver solver(model);
          out.exact = solver.loo_log_predictives();
          out.psi_exact = out.exact.sum();
          auto rep = run_conjugate_replicate(solver, out.exact, cfg.methods, S,
                                             rep_seed, cfg.K,
                                             cfg.total_samples);
          out.records = std::move(rep.records);
          out.psi_value = std::move(rep.psi_value);
          out.seconds = std::move(rep.seconds);
        } catch (const std::exception& e) {
          out.failed = true;
          out.message = e.what();
        }
      });

  std::map<Method, MethodEval> evals;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const RepOut& out = reps[r];
    if (out.failed) {
      failures.push_back(cell_label + " replicate " + std::to_string(r) +
                         ": " + out.message);
      continue;
    }
    for (const auto& [method, recs] : out.records) {
      accumulate_records(recs, out.exact, evals[method]);
      evals[method].seconds += out.seconds.at(method);
    }
    for (const auto& [method, psi] : out.psi_value) {
      MethodEval& ev = evals[method];
      if (!std::isfinite(psi)) {
        ++ev.n_bad;
        continue;
      }
      const double e = psi - out.psi_exact;
      ev.mse_sum += e * e;
      ev.max_sum += e * e;
      ev.rep_mse.push_back(e * e);
      ++ev.n_reps;
    }
    for (const auto& [method, recs] : out.records) {
      if (method == Method::Psis) {
        evals[method].khat_frac_sum += khat_fraction(recs);
      }
    }
  }
  return evals;
}

inline void emit_method_rows(ResultTable& table,
                             const std::map<Method, MethodEval>& evals,
                             std::map<std::string, std::string> base_key) {
  for (const auto& [method, ev] : evals) {
    ResultRow row;
    row.key = base_key;
    row.key["method"] = method_name(method);
    if (ev.n_reps > 0) {
      row.stats["mse_mean"] = ev.mse_sum / ev.n_reps;
      row.stats["mse_max"] = ev.max_sum / ev.n_reps;
      if (method == Method::Psis) {
        row.stats["khat_frac"] = ev.khat_frac_sum / ev.n_reps;
      }
    }
    row.stats["n_replicates"] = static_cast<double>(ev.n_reps);
    row.stats["n_failed"] = static_cast<double>(ev.n_bad);
    row.stats["runtime_sec"] = ev.seconds;
    table.rows.push_back(std::move(row));
  }
}

}  // namespace detail

inline void cfg_check_conjugate(const ExperimentConfig& cfg) {
  if (cfg.model != "gaussian-conjugate") {
    throw ConfigError("design '" + cfg.design +
                      "' needs the gaussian-conjugate backend");
  }
}

/// MSE of the log-estimates across a p/n grid at fixed S, averaged over
/// replicate datasets and observations.
inline ResultTable run_mse_grid(const ExperimentConfig& cfg) {
  cfg_check_conjugate(cfg);
  ResultTable table;
  table.seed = cfg.seed;
  table.config_echo = config_echo(cfg);
  std::uint64_t cell = 0;
  for (const double pn : cfg.pn_grid) {
    const Eigen::Index p =
        std::max<Eigen::Index>(1, static_cast<Eigen::Index>(
                                      std::llround(pn * cfg.n)));
    ++cell;
    const std::uint64_t cell_seed = derive_seed(cfg.seed, 2000000 + cell);
    const std::string label =
        "mse-grid p/n=" + std::to_string(pn);
    auto evals = detail::run_mse_cell(cfg, cfg.n, p, cfg.S, cell_seed,
                                      table.failures, label);
    std::map<std::string, std::string> key = {
        {"design", "mse-grid"},
        {"n", std::to_string(cfg.n)},
        {"p", std::to_string(p)},
        {"pn", detail::format_double(pn)},
        {"S", std::to_string(cfg.S)}};
    detail::emit_method_rows(table, evals, std::move(key));
  }
  return table;
}

/// MSE as a function of S at fixed (n, p), plus the fitted log-log slope
/// per method.
inline ResultTable run_mse_vs_s(const ExperimentConfig& cfg) {
  cfg_check_conjugate(cfg);
  ResultTable table;
  table.seed = cfg.seed;
  table.config_echo = config_echo(cfg);
  const Eigen::Index p = cfg.p > 0 ? cfg.p : cfg.n;
  std::map<Method, std::vector<std::pair<double, double>>> mse_by_s;
  std::uint64_t cell = 0;
  for (const int S : cfg.S_grid) {
    ++cell;
    const std::uint64_t cell_seed = derive_seed(cfg.seed, 3000000 + cell);
    const std::string label = "mse-vs-s S=" + std::to_string(S);
    auto evals = detail::run_mse_cell(cfg, cfg.n, p, S, cell_seed,
                                      table.failures, label);
    std::map<std::string, std::string> key = {
        {"design", "mse-vs-s"},
        {"n", std::to_string(cfg.n)},
        {"p", std::to_string(static_cast<int>(p))},
        {"S", std::to_string(S)}};
    for (const auto& [method, ev] : evals) {
      if (ev.n_reps > 0) {
        mse_by_s[method].push_back({static_cast<double>(S),
                                    ev.mse_sum / ev.n_reps});
      }
    }
    detail::emit_method_rows(table, evals, std::move(key));
  }
  for (const auto& [method, pts] : mse_by_s) {
    if (pts.size() < 2) continue;
    VectorXd lx(static_cast<Eigen::Index>(pts.size()));
    VectorXd ly(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      lx[static_cast<Eigen::Index>(i)] = std::log(pts[i].first);
      ly[static_cast<Eigen::Index>(i)] = std::log(pts[i].second);
    }
    ResultRow row;
    row.key = {{"design", "mse-vs-s"},
               {"n", std::to_string(cfg.n)},
               {"p", std::to_string(static_cast<int>(p))},
               {"S", "all"},
               {"method", method_name(method)}};
    row.stats["slope"] = ols_slope(lx, ly);
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace loomix
