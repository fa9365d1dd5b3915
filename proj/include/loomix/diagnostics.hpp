#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "loomix/errors.hpp"
#include "loomix/math.hpp"

namespace loomix {

struct ChainDiagnostics {
  VectorXd split_rhat;  // per dimension; NaN sentinel for degenerate chains
  VectorXd ess_bulk;    // per dimension; capped at the total draw count
  double accept_rate = 0.0;
  int divergence_count = 0;
};

namespace detail {

/// Split each sequence in half (odd lengths drop the middle element).
inline std::vector<VectorXd> split_halves(const std::vector<VectorXd>& chains) {
  std::vector<VectorXd> out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const Eigen::Index half = c.size() / 2;
    out.push_back(c.head(half));
    out.push_back(c.tail(half));
  }
  return out;
}

/// Rank-normalize jointly across sequences: average ranks mapped through the
/// normal quantile of (r - 3/8)/(N + 1/4).
inline std::vector<VectorXd> rank_normalize(const std::vector<VectorXd>& seqs) {
  std::size_t total = 0;
  for (const auto& s : seqs) total += static_cast<std::size_t>(s.size());
  struct Entry {
    double value;
    std::size_t seq, pos;
  };
  std::vector<Entry> entries;
  entries.reserve(total);
  for (std::size_t m = 0; m < seqs.size(); ++m) {
    for (Eigen::Index l = 0; l < seqs[m].size(); ++l) {
      entries.push_back({seqs[m][l], m, static_cast<std::size_t>(l)});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });
  std::vector<VectorXd> out(seqs.size());
  for (std::size_t m = 0; m < seqs.size(); ++m) out[m].resize(seqs[m].size());
  std::size_t i = 0;
  while (i < entries.size()) {
    std::size_t j = i;
    while (j + 1 < entries.size() && entries[j + 1].value == entries[i].value) {
      ++j;
    }
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                                   static_cast<double>(j + 1));
    const double z = normal_quantile((avg_rank - 0.375) /
                                     (static_cast<double>(total) + 0.25));
    for (std::size_t k = i; k <= j; ++k) {
      out[entries[k].seq][static_cast<Eigen::Index>(entries[k].pos)] = z;
    }
    i = j + 1;
  }
  return out;
}

/// Classic potential-scale-reduction on a set of equal-length sequences.
inline double rhat_of(const std::vector<VectorXd>& seqs) {
  const std::size_t m = seqs.size();
  const double L = static_cast<double>(seqs[0].size());
  VectorXd means(m), vars(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[static_cast<Eigen::Index>(j)] = seqs[j].mean();
    vars[static_cast<Eigen::Index>(j)] =
        (seqs[j].array() - seqs[j].mean()).square().sum() / (L - 1.0);
  }
  const double W = vars.mean();
  if (!(W > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double B =
      L * (means.array() - means.mean()).square().sum() / (m - 1.0);
  const double var_plus = (L - 1.0) / L * W + B / L;
  return std::sqrt(var_plus / W);
}

/// Effective sample size of equal-length sequences via Geyer's initial
/// monotone positive pair sequence. Autocovariances are computed lag by lag
/// so long chains stop as soon as the pairs turn negative.
inline double ess_of(const std::vector<VectorXd>& seqs) {
  const std::size_t m = seqs.size();
  const Eigen::Index L = seqs[0].size();
  if (L < 4) return std::numeric_limits<double>::quiet_NaN();
  std::vector<VectorXd> centered(m);
  VectorXd means(m);
  for (std::size_t j = 0; j < m; ++j) {
    means[static_cast<Eigen::Index>(j)] = seqs[j].mean();
    centered[j] = seqs[j].array() - seqs[j].mean();
  }
  const auto mean_acov = [&](Eigen::Index t) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      s += centered[j].head(L - t).dot(centered[j].tail(L - t));
    }
    return s / (static_cast<double>(m) * static_cast<double>(L));
  };
  const double acov0 = mean_acov(0);
  const double mean_var = acov0 * L / (L - 1.0);
  double var_plus = mean_var * (L - 1.0) / L;
  if (m > 1) {
    var_plus += (means.array() - means.mean()).square().sum() / (m - 1.0);
  }
  if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

  const double rho1 = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  Eigen::Index t = 1;
  double tau = 1.0 + rho1;  // first Geyer pair (rho_0 + rho_1)
  double prev_pair = tau;
  while (t + 2 < L - 2) {
    const double even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    const double odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    double pair = even + odd;
    if (pair <= 0.0) break;
    if (pair > prev_pair) pair = prev_pair;  // enforce monotone decrease
    tau += pair;
    prev_pair = pair;
    t += 2;
  }
  const double total = static_cast<double>(m) * static_cast<double>(L);
  double ess = total / (2.0 * tau - 1.0);
  return std::min(ess, total);
}

}  // namespace detail

/// Rank-normalized split R-hat for one scalar parameter given >= 2 chains of
/// >= 8 draws each. Constant input returns NaN.
inline double split_rhat(const std::vector<VectorXd>& chains) {
  if (chains.size() < 2) {
    throw ConfigError("split_rhat: need >= 2 chains (>= 4 split segments)");
  }
  for (const auto& c : chains) {
    if (c.size() < 8) throw ConfigError("split_rhat: need >= 4 draws per half");
  }
  auto halves = detail::split_halves(chains);
  return detail::rhat_of(detail::rank_normalize(halves));
}

/// Rank-normalized bulk effective sample size for one scalar parameter.
inline double ess_bulk(const std::vector<VectorXd>& chains) {
  if (chains.size() < 2) {
    throw ConfigError("ess_bulk: need >= 2 chains (>= 4 split segments)");
  }
  for (const auto& c : chains) {
    if (c.size() < 8) throw ConfigError("ess_bulk: need >= 4 draws per half");
  }
  auto halves = detail::split_halves(chains);
  return detail::ess_of(detail::rank_normalize(halves));
}

}  // namespace loomix
