#pragma once

#include "mixlasso/grouplasso.hpp"
#include "mixlasso/model.hpp"
#include "mixlasso/types.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace mixlasso {

/// Penalty level policy. Fixed mode keeps one lambda for every iteration
/// (the practical mode, tuned by BIC); schedule mode contracts geometrically
/// toward a noise floor, lambda_{t+1} = kappa * lambda_t + floor with
/// floor = floor_coefficient * sqrt(log(dim) * log(n)^2 / n).
struct LambdaRule {
  enum class Mode { Fixed, Schedule };
  Mode mode = Mode::Fixed;
  double value = 0.0;  // fixed lambda, or lambda_0 in schedule mode
  double kappa = 0.3;
  double floor_coefficient = 1.0;

  static LambdaRule fixed(double lambda) { return {Mode::Fixed, lambda, 0.3, 1.0}; }
  static LambdaRule schedule(double lambda0, double kappa = 0.3,
                             double floor_coefficient = 1.0) {
    return {Mode::Schedule, lambda0, kappa, floor_coefficient};
  }
};

/// Noise variance policy: held fixed, or re-estimated each iteration from the
/// responsibility-weighted residuals (floored at 1e-8).
struct NoiseRule {
  enum class Mode { Fixed, Adaptive };
  Mode mode = Mode::Fixed;
  double sigma2 = 1.0;  // fixed value, or the adaptive starting value

  static NoiseRule fixed(double sigma2) { return {Mode::Fixed, sigma2}; }
  static NoiseRule adaptive(double initial = 1.0) { return {Mode::Adaptive, initial}; }
};

struct EMConfig {
  int k = 2;
  LambdaRule lambda = LambdaRule::fixed(0.0);
  NoiseRule sigma2 = NoiseRule::fixed(1.0);
  int max_iter = 20;       // T
  double conv_tol = 1e-3;  // on ||beta^{(t+1)} - beta^{(t)}||_F
  double solver_tol = 1e-7;
  int solver_max_iter = 1000;
  std::uint64_t seed = 0;  // bookkeeping only; the engine itself draws no randomness
};

struct EMIterationRecord {
  int iteration = 0;  // 0 is the initial state
  double lambda = 0.0;
  double penalized_loglik = 0.0;
  double loglik = 0.0;
  Vector omega;
  double delta_beta = 0.0;
  double sigma2 = 0.0;
  int solver_sweeps = 0;
  double solver_kkt_gap = 0.0;
  bool solver_converged = true;
};

struct EMTrace {
  std::vector<EMIterationRecord> records;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

struct FitResult {
  MixtureParams params;
  EMTrace trace;
  Responsibilities eta;
  std::vector<Index> support;  // predictors with a nonzero coefficient in any slice
  int nonzero_groups = 0;      // nonzero (j,l) penalty groups
  double lambda = 0.0;         // penalty level of the last M-step
  double bic = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
};

/// floor_coefficient * sqrt(log(dim) * log(n)^2 / n). `dim` is p for the
/// univariate model and p*q for the multivariate one.
double lambda_schedule_floor(double floor_coefficient, Index n, Index dim);

/// kappa * lambda_t + floor_value.
double lambda_schedule_next(double lambda_t, double kappa, double floor_value);

/// Next penalty level under `rule`; fixed mode returns lambda_t unchanged.
double lambda_schedule_next(double lambda_t, const LambdaRule& rule, Index n, Index dim);

/// Penalized EM for the univariate (q = 1) mixture linear model: alternate the
/// responsibility E-step, the weighted-moment computation, and the group-lasso
/// M-step (warm-started at the previous coefficients) until
/// ||beta^{(t+1)} - beta^{(t)}||_F < conv_tol or max_iter is reached.
/// A collapsing mixture weight (min omega_hat < 1e-3) sets the degeneracy flag
/// and ends the fit with the last healthy parameters; it never throws.
FitResult em_fit(const Dataset& data, const MixtureParams& init, const EMConfig& config);

/// Descending geometric grid of n_points values from lambda_max down to
/// min_ratio * lambda_max, with lambda_max evaluated at the initializer's
/// responsibilities.
std::vector<double> make_lambda_grid(const Dataset& data, const MixtureParams& init,
                                     int n_points = 50, double min_ratio = 0.01);

/// Fixed-lambda fits over a strictly descending grid, each warm-started from
/// the previous solution. Each result carries its BIC.
std::vector<FitResult> fit_path(const Dataset& data, const MixtureParams& init,
                                const std::vector<double>& lambdas, const EMConfig& config);

/// -2 n loglik + df log(n) with df = K * (#nonzero groups) + (K-1) + 1.
double bic_value(const FitResult& fit, const Dataset& data);

/// Smallest-BIC element of the path; ties go to the earlier (larger-lambda) fit.
FitResult bic_select(const std::vector<FitResult>& path, const Dataset& data);

/// Rows of beta with a nonzero coefficient in any slice or column.
std::vector<Index> nonzero_rows(const std::vector<Matrix>& beta);

/// Number of (j,l) positions that are nonzero in at least one slice.
int nonzero_group_count(const std::vector<Matrix>& beta);

}  // namespace mixlasso
