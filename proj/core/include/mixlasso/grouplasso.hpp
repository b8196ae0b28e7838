#pragma once

#include "mixlasso/types.hpp"

namespace mixlasso {

/// Convex M-step problem in moment form:
///   minimize sum_k beta_k^T sigma_hat_k beta_k - 2 sum_k tr(rho_hat_k^T beta_k)
///            + lambda * sum_{j,l} || (beta_1(j,l), ..., beta_K(j,l)) ||_2
/// Each coefficient position (j,l) is one penalty group of size K; for q = 1
/// the groups are the predictor rows. The quadratic part separates over
/// response columns, so general q reduces to q coupled-across-k problems.
struct MStepProblem {
  std::vector<Matrix> sigma_hat;  // K slices, p x p PSD
  std::vector<Matrix> rho_hat;    // K slices, p x q
  double lambda = 0.0;

  int k() const { return static_cast<int>(sigma_hat.size()); }
  Index p() const { return sigma_hat.empty() ? 0 : sigma_hat.front().rows(); }
  Index q() const { return rho_hat.empty() ? 0 : rho_hat.front().cols(); }
};

struct SolverReport {
  std::vector<Matrix> beta;  // K slices, p x q
  int iterations = 0;        // sweeps over groups
  double final_kkt_gap = 0.0;
  bool converged = false;
};

/// Blockwise majorization descent. Each group's quadratic is majorized by
/// h_j I with h_j = 2 max_k sigma_hat_k(j,j) + 1e-10, which makes the block
/// update a closed-form group soft-threshold. Sweeps cycle over all groups,
/// then iterate on the nonzero groups until stable, and repeat until the
/// largest blockwise KKT violation falls below tol. Groups whose diagonal is
/// zero in every slice (degenerate predictors) are pinned at zero.
SolverReport solve_mstep(const MStepProblem& problem,
                         const std::vector<Matrix>* warm_start = nullptr,
                         double tol = 1e-7, int max_iter = 1000);

/// Largest blockwise stationarity violation at beta: for zero groups
/// max(0, ||grad_g|| - lambda), otherwise ||grad_g + lambda beta_g/||beta_g||||,
/// with grad_g stacking 2(sigma_hat_k beta_k - rho_hat_k) over the group.
double kkt_gap(const MStepProblem& problem, const std::vector<Matrix>& beta);

/// Smallest lambda whose solution is identically zero: max_g ||2 rho_hat_g||.
double lambda_max(const std::vector<Matrix>& rho_hat);

/// Value of the M-step objective at beta (used by tests and diagnostics).
double mstep_objective(const MStepProblem& problem, const std::vector<Matrix>& beta);

}  // namespace mixlasso
