#pragma once

#include "mixlasso/em.hpp"

#include <cstdint>
#include <utility>

namespace mixlasso {

/// Initialization strategies.
///
/// screen_spectral: an l1-penalized pooled regression (BIC-tuned) screens the
/// predictors down to `screen_size`; on the screened design, one deterministic
/// candidate splits samples by pooled-residual sign (quantile bins for K > 2)
/// and fits per-split least squares, the remaining `restarts - 1` candidates
/// draw random responsibilities and take one M-step. Every candidate is
/// polished by a few penalized EM iterations and the best penalized
/// log-likelihood wins (ties to the lowest candidate index).
///
/// random_restarts: random-responsibility candidates only, on the screened
/// design when the screen is nonempty.
///
/// oracle_perturb: the supplied truth plus a uniform perturbation of Frobenius
/// radius `radius` on beta and +-radius on omega_1 (projected back to the
/// simplex). Used for basin-of-attraction experiments.
struct InitStrategy {
  enum class Variant { ScreenSpectral, RandomRestarts, OraclePerturb };
  Variant variant = Variant::ScreenSpectral;
  int screen_size = 0;  // 0 -> min(floor(2n/log n), p)
  int restarts = 10;
  int short_iters = 3;
  MixtureParams truth;
  double radius = 0.0;
  std::uint64_t seed = 0;

  static InitStrategy screen_spectral(int screen_size = 0, int restarts = 10,
                                      std::uint64_t seed = 0) {
    InitStrategy s;
    s.variant = Variant::ScreenSpectral;
    s.screen_size = screen_size;
    s.restarts = restarts;
    s.seed = seed;
    return s;
  }
  static InitStrategy random_restarts(int restarts, int short_iters = 3,
                                      std::uint64_t seed = 0) {
    InitStrategy s;
    s.variant = Variant::RandomRestarts;
    s.restarts = restarts;
    s.short_iters = short_iters;
    s.seed = seed;
    return s;
  }
  static InitStrategy oracle_perturb(MixtureParams truth, double radius,
                                     std::uint64_t seed = 0) {
    InitStrategy s;
    s.variant = Variant::OraclePerturb;
    s.truth = std::move(truth);
    s.radius = radius;
    s.seed = seed;
    return s;
  }
};

/// Produce starting parameters for the univariate (q = 1) engine.
/// Deterministic given (data, k, strategy). An all-null screening lasso falls
/// back to random restarts on the full predictor set.
MixtureParams initialize(const Dataset& data, int k, const InitStrategy& strategy);

/// Starting parameters for the multivariate engine (isotropic errors; whiten
/// first when a full sigma_y is in play). For q > 1, a univariate
/// screen-spectral run on each response column proposes mixture structure and
/// the candidate with the best joint penalized log-likelihood wins.
MixtureParams mv_initialize(const Dataset& data, int k, const InitStrategy& strategy);

/// Responsibilities and hard labels under an initializer, the "plug the
/// initializer into the E-step" baseline.
std::pair<Responsibilities, std::vector<int>> init_responsibility_eval(
    const MixtureParams& init, const Dataset& data);

/// BIC-tuned lasso coefficients of y on x over a warm-started descending grid.
Vector lasso_regression_bic(const Matrix& x, const Vector& y, int grid_points = 30,
                            double min_ratio = 0.01);

}  // namespace mixlasso
