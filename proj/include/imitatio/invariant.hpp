#pragma once

#include <optional>
#include <vector>

#include "imitatio/kernel.hpp"
#include "imitatio/matrix.hpp"

namespace imitatio {

/// One-step transition matrix of the embedded chain: the theta-weighted
/// average of the depth matrices (tail included with its total mass).
StochasticMatrix p_hat(const ImitationKernel& kernel);

/// Stationary distribution of a stochastic matrix, residual below 1e-12.
/// With several closed classes a mixture weight per class (ordered by least
/// member) must be supplied; transient states always get weight zero.
Distribution invariant_distribution(
    const StochasticMatrix& p,
    const std::optional<std::vector<double>>& class_weights = std::nullopt);

/// Max-norm of lambda*P - lambda, the check the solver itself applies.
double invariant_residual(const StochasticMatrix& p, const Distribution& lambda);

}  // namespace imitatio
