#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <vector>

namespace mixlasso {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when a fit collapses to an exactly interpolating solution
/// (zero residual mass), which would drive an adaptive noise variance to 0.
struct degenerate_fit_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Design matrix plus response. The response is always stored as an n x q
/// matrix; the univariate model is the q = 1 case.
struct Dataset {
  Matrix x;  // n x p
  Matrix y;  // n x q

  Dataset() = default;
  Dataset(Matrix x_in, Matrix y_in);

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  Index q() const { return y.cols(); }
};

/// Mixture-of-regressions parameters: mixing weights, one coefficient slice
/// per mixture, and the noise scale. `sigma2` is the isotropic variance used
/// by the univariate model (and by whitened multivariate fits); `sigma_y`
/// carries a full q x q error covariance when one is in play.
struct MixtureParams {
  Vector omega;               // K, strictly positive, sums to 1
  std::vector<Matrix> beta;   // K slices, each p x q
  double sigma2 = 1.0;
  std::optional<Matrix> sigma_y;

  int k() const { return static_cast<int>(omega.size()); }
  Index p() const { return beta.empty() ? 0 : beta.front().rows(); }
  Index q() const { return beta.empty() ? 0 : beta.front().cols(); }

  /// Throws std::invalid_argument on any violated invariant
  /// (omega off the simplex, non-finite beta, non-positive sigma2, ...).
  void validate() const;

  /// Zero-initialized parameters with uniform weights.
  static MixtureParams zero(int k, Index p, Index q = 1);
};

/// Posterior mixture membership probabilities, one row per sample.
/// Rows are probability vectors: entries in [0,1] summing to 1.
struct Responsibilities {
  Matrix eta;  // n x K

  Index n() const { return eta.rows(); }
  int k() const { return static_cast<int>(eta.cols()); }

  void validate() const;
};

/// Responsibility-weighted sufficient statistics consumed by the M-step:
///   omega_hat_k = mean_i eta_ik
///   rho_hat_k   = (1/n) sum_i eta_ik x_i y_i^T   (times Sigma_y^{-1} if given)
///   sigma_hat_k = (1/n) sum_i eta_ik x_i x_i^T
struct WeightedMoments {
  Vector omega_hat;               // K
  std::vector<Matrix> rho_hat;    // K slices, p x q
  std::vector<Matrix> sigma_hat;  // K slices, p x p, PSD
};

}  // namespace mixlasso
