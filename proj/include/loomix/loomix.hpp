#pragma once

// Umbrella header: LOO-CV predictive probabilities via exact conjugate
// machinery, gradient-based MCMC, and a family of self-normalized
// importance-sampling estimators built around the mixture of LOO posteriors.

#include "loomix/cholesky.hpp"
#include "loomix/conjugate.hpp"
#include "loomix/dataset.hpp"
#include "loomix/diagnostics.hpp"
#include "loomix/errors.hpp"
#include "loomix/estimate_file.hpp"
#include "loomix/estimators.hpp"
#include "loomix/experiments.hpp"
#include "loomix/glm.hpp"
#include "loomix/hmc.hpp"
#include "loomix/math.hpp"
#include "loomix/model.hpp"
#include "loomix/parallel.hpp"
#include "loomix/psis.hpp"
#include "loomix/result_io.hpp"
#include "loomix/rng.hpp"
#include "loomix/sample_set.hpp"
