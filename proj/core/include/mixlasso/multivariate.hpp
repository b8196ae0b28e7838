#pragma once

#include "mixlasso/em.hpp"

namespace mixlasso {

/// Configuration for the multivariate-response engine. The error covariance
/// sigma_y is a fixed, known input (empty means the identity); it is never
/// re-estimated. The base config's noise rule is ignored: after whitening the
/// effective error is N(0, I_q).
struct MVEMConfig {
  EMConfig base;
  Matrix sigma_y;  // q x q SPD, or empty for identity
};

/// Penalized EM for the q-variate mixture linear model. A non-identity
/// sigma_y is reduced to the identity case by whitening: y is replaced by
/// y sigma_y^{-1/2} and the coefficient target becomes beta sigma_y^{-1/2},
/// so the cross-mixture (j,l)-entry group penalty applies to the whitened
/// coefficients. Outputs are mapped back to the original scale; trace
/// log-likelihoods include the -log|sigma_y|/2 normalization so they match
/// the sigma_y-weighted likelihood.
FitResult mv_em_fit(const Dataset& data, const MixtureParams& init, const MVEMConfig& config);

/// Warm-started descending-lambda path for the multivariate engine.
std::vector<FitResult> mv_fit_path(const Dataset& data, const MixtureParams& init,
                                   const std::vector<double>& lambdas,
                                   const MVEMConfig& config);

/// Lambda grid anchored at lambda_max of the whitened problem.
std::vector<double> mv_make_lambda_grid(const Dataset& data, const MixtureParams& init,
                                        const MVEMConfig& config, int n_points = 50,
                                        double min_ratio = 0.01);

/// sum_j sum_l sqrt(sum_k beta_k(j,l)^2).
double mv_group_norm(const std::vector<Matrix>& beta);

}  // namespace mixlasso
