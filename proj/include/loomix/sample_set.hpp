#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "loomix/errors.hpp"
#include "loomix/model.hpp"

namespace loomix {

/// S parameter draws with the n x S log-likelihood matrix cached; the input
/// every estimator consumes. Column s of loglik holds {log p(y_i|theta_s)}_i.
struct WeightedSampleSet {
  MatrixXd thetas;        // dim x S
  MatrixXd loglik;        // n x S
  TargetKind source = TargetKind::Posterior;
  std::uint64_t seed = 0;

  Eigen::Index n_draws() const { return loglik.cols(); }
  Eigen::Index n_obs() const { return loglik.rows(); }

  static WeightedSampleSet from_draws(const PointwiseModel& model,
                                      MatrixXd draws, TargetKind source,
                                      std::uint64_t seed) {
    if (draws.cols() < 2) {
      throw ConfigError("WeightedSampleSet: need at least S = 2 draws");
    }
    WeightedSampleSet out;
    out.loglik = model.loglik_matrix(draws);
    out.thetas = std::move(draws);
    out.source = source;
    out.seed = seed;
    return out;
  }
};

}  // namespace loomix
