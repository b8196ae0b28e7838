#pragma once

#include "mixlasso/em.hpp"

namespace mixlasso::detail {

// Per-dataset quantities reused across a whole lambda path: the full gram
// matrix x^T x / n (closes the last weighted-gram slice and serves cold
// columns) and the squared design (weighted-gram diagonals by one GEMV).
struct EmContext {
  const Dataset* data = nullptr;
  Matrix gram;  // x^T x / n
  Matrix xsq;   // elementwise square of x

  explicit EmContext(const Dataset& d);
};

// Shared engine behind em_fit and the multivariate front end. Works for any
// q >= 1 with isotropic N(0, sigma2 I_q) errors; full covariances are handled
// by whitening before entry.
FitResult em_fit_core(const EmContext& ctx, MixtureParams params, const EMConfig& cfg);

// Warm-started fixed-lambda path over a strictly descending grid.
std::vector<FitResult> fit_path_core(const EmContext& ctx, const MixtureParams& init,
                                     const std::vector<double>& lambdas,
                                     const EMConfig& cfg);

}  // namespace mixlasso::detail
