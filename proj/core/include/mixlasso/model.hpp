#pragma once

#include "mixlasso/types.hpp"

namespace mixlasso {

/// E-step: posterior membership probabilities under the current parameters.
/// All densities are evaluated in log space and rows are normalized with a
/// log-sum-exp reduction, so extreme logits cannot overflow. Uses the
/// isotropic N(0, sigma2 I_q) error density unless params.sigma_y is set.
Responsibilities responsibilities(const MixtureParams& params, const Dataset& data);

/// Weighted first/second moments of the data under the given responsibilities.
/// When `sigma_y` is non-null, rho_hat is post-multiplied by its inverse,
/// applied through a Cholesky solve (never an explicit inverse).
/// When `gram` is non-null it must equal x^T x / n; the last sigma_hat slice is
/// then closed against it so the slices partition x^T x / n exactly.
WeightedMoments weighted_moments(const Responsibilities& eta, const Dataset& data,
                                 const Matrix* sigma_y = nullptr,
                                 const Matrix* gram = nullptr);

/// Average conditional log-likelihood (1/n) sum_i log sum_k omega_k phi(...).
double loglik(const MixtureParams& params, const Dataset& data);

/// Sum over coefficient positions (j,l) of the l2 norm across mixtures,
/// sum_{j,l} sqrt(sum_k beta_k(j,l)^2). For q = 1 this is the usual
/// predictor-level group norm.
double group_penalty_norm(const std::vector<Matrix>& beta);

/// loglik minus (lambda/2) times the cross-mixture group norm of beta.
double penalized_loglik(const MixtureParams& params, const Dataset& data, double lambda);

/// Responsibility-weighted mean squared residual, the adaptive update for the
/// univariate noise variance. Throws degenerate_fit_error when the residual
/// mass vanishes (an exactly interpolating fit).
double update_sigma2(const Responsibilities& eta, const MixtureParams& params,
                     const Dataset& data);

/// Hard labels: per-row argmax of eta, ties broken toward the lowest index.
std::vector<int> assign_labels(const Responsibilities& eta);

}  // namespace mixlasso
