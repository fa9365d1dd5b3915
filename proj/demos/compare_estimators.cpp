// Side-by-side comparison of the LOO-CV estimators on a synthetic
// high-dimensional regression instance where the exact answers are known.
//
//   ./compare_estimators [n] [p] [S]

#include <cstdio>
#include <cstdlib>

#include "loomix/loomix.hpp"

using namespace loomix;

int main(int argc, char** argv) {
  const Eigen::Index n = argc > 1 ? std::atoi(argv[1]) : 50;
  const Eigen::Index p = argc > 2 ? std::atoi(argv[2]) : 100;
  const Eigen::Index S = argc > 3 ? std::atoi(argv[3]) : 2000;

  const PriorSpec prior = PriorSpec::isotropic(10.0);
  const auto [model, theta] = gen_synthetic(n, p, 1.0, prior, 42);
  const ConjugateSolver solver(model);
  const VectorXd exact = solver.loo_log_predictives();
  std::printf("n=%ld p=%ld S=%ld   exact psi = %.4f   max leverage = %.3f\n",
              static_cast<long>(n), static_cast<long>(p),
              static_cast<long>(S), exact.sum(),
              hat_diag(model.data().X(), 1.0, prior).maxCoeff());

  const auto report = [&](const char* name,
                          const std::vector<EstimateRecord>& recs) {
    double mse = 0.0, worst = 0.0;
    for (const auto& r : recs) {
      const double e = r.log_mu_hat - exact[r.index];
      mse += e * e / static_cast<double>(n);
      worst = std::max(worst, e * e);
    }
    const auto psi = psi_plugin(recs);
    std::printf("%-10s psi = %9.4f   MSE(log mu) mean %.3e  max %.3e\n", name,
                psi.value, mse, worst);
  };

  const auto post = solver.sample_posterior_iid(S, 1);
  report("posterior", posterior_estimate(post));
  report("psis", psis_estimate(post));
  const MixtureExact mix = solver.mixture_exact();
  report("mixture", mixture_estimate(solver.sample_mixture_iid(mix, S, 2)).records);
  report("bronze", bronze_estimate(solver.sample_bronze_iid(S, 3)));
  return 0;
}
