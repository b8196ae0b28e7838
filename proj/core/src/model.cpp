#include "mixlasso/model.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace mixlasso {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Dataset::Dataset(Matrix x_in, Matrix y_in) : x(std::move(x_in)), y(std::move(y_in)) {
  require(x.rows() == y.rows(), "Dataset: x and y row counts differ");
  require(x.rows() >= 2, "Dataset: need at least two samples");
  require(x.allFinite() && y.allFinite(), "Dataset: non-finite entries");
}

void MixtureParams::validate() const {
  require(omega.size() >= 1, "MixtureParams: empty omega");
  require(static_cast<int>(beta.size()) == k(), "MixtureParams: beta slice count != K");
  require((omega.array() > 0.0).all(), "MixtureParams: omega entries must be positive");
  require(std::abs(omega.sum() - 1.0) <= 1e-10, "MixtureParams: omega must sum to 1");
  require(sigma2 > 0.0, "MixtureParams: sigma2 must be positive");
  for (const Matrix& b : beta) {
    require(b.rows() == p() && b.cols() == q(), "MixtureParams: ragged beta slices");
    require(b.allFinite(), "MixtureParams: non-finite beta");
  }
  if (sigma_y) {
    require(sigma_y->rows() == q() && sigma_y->cols() == q(),
            "MixtureParams: sigma_y must be q x q");
    require(sigma_y->isApprox(sigma_y->transpose(), 1e-12), "MixtureParams: sigma_y not symmetric");
    Eigen::LLT<Matrix> llt(*sigma_y);
    require(llt.info() == Eigen::Success, "MixtureParams: sigma_y not positive definite");
  }
}

MixtureParams MixtureParams::zero(int k, Index p, Index q) {
  MixtureParams out;
  out.omega = Vector::Constant(k, 1.0 / k);
  out.beta.assign(k, Matrix::Zero(p, q));
  return out;
}

void Responsibilities::validate() const {
  require(eta.allFinite(), "Responsibilities: non-finite entries");
  require((eta.array() >= 0.0).all() && (eta.array() <= 1.0).all(),
          "Responsibilities: entries outside [0,1]");
  require(((eta.rowwise().sum().array() - 1.0).abs() <= 1e-10).all(),
          "Responsibilities: rows must sum to 1");
}

namespace {

// n x K matrix of log(omega_k) + log phi(y_i - beta_k^T x_i). One code path
// serves q = 1 and q > 1; a full sigma_y covariance goes through a Cholesky
// factorization, the default is the isotropic sigma2 * I_q density.
Matrix log_weighted_densities(const MixtureParams& params, const Dataset& data) {
  const Index n = data.n();
  const int k = params.k();
  const Index q = data.q();
  Matrix logdens(n, k);

  if (params.sigma_y) {
    Eigen::LLT<Matrix> llt(*params.sigma_y);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("responsibilities: sigma_y factorization failed");
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double cnst = -0.5 * (q * kLog2Pi + logdet);
    for (int j = 0; j < k; ++j) {
      Matrix resid = data.y - data.x * params.beta[j];           // n x q
      Matrix half = llt.matrixL().solve(resid.transpose());      // q x n
      logdens.col(j) = std::log(params.omega[j]) + cnst -
                       0.5 * half.colwise().squaredNorm().transpose().array();
    }
  } else {
    const double s2 = params.sigma2;
    const double cnst = -0.5 * q * (kLog2Pi + std::log(s2));
    for (int j = 0; j < k; ++j) {
      Matrix resid = data.y - data.x * params.beta[j];
      logdens.col(j) = std::log(params.omega[j]) + cnst -
                       resid.rowwise().squaredNorm().array() / (2.0 * s2);
    }
  }
  if (!logdens.allFinite())
    throw std::runtime_error("responsibilities: non-finite log-density (corrupt parameters)");
  return logdens;
}

}  // namespace

Responsibilities responsibilities(const MixtureParams& params, const Dataset& data) {
  require(params.p() == data.p() && params.q() == data.q(),
          "responsibilities: params/data dimension mismatch");
  Matrix logdens = log_weighted_densities(params, data);
  Vector rowmax = logdens.rowwise().maxCoeff();
  Matrix eta = (logdens.colwise() - rowmax).array().exp();
  eta.array().colwise() /= eta.rowwise().sum().array();
  return Responsibilities{std::move(eta)};
}

WeightedMoments weighted_moments(const Responsibilities& eta, const Dataset& data,
                                 const Matrix* sigma_y, const Matrix* gram) {
  const Index n = data.n();
  require(eta.n() == n, "weighted_moments: eta/data row mismatch");
  const int k = eta.k();

  WeightedMoments out;
  out.omega_hat = eta.eta.colwise().mean();
  out.rho_hat.reserve(k);
  out.sigma_hat.reserve(k);

  std::optional<Eigen::LLT<Matrix>> llt;
  if (sigma_y) {
    llt.emplace(*sigma_y);
    if (llt->info() != Eigen::Success)
      throw std::invalid_argument("weighted_moments: singular sigma_y");
  }

  for (int j = 0; j < k; ++j) {
    const auto w = eta.eta.col(j).array() / static_cast<double>(n);
    Matrix rho = data.x.transpose() * (data.y.array().colwise() * w).matrix();
    if (llt) rho = llt->solve(rho.transpose()).transpose();  // rho * sigma_y^{-1}
    out.rho_hat.push_back(std::move(rho));

    if (gram && j == k - 1) {
      // Responsibilities partition unity, so the slices sum to x^T x / n.
      Matrix last = *gram;
      for (int jj = 0; jj < k - 1; ++jj) last -= out.sigma_hat[jj];
      out.sigma_hat.push_back(std::move(last));
    } else {
      Matrix wx = data.x.array().colwise() * w;
      out.sigma_hat.push_back(data.x.transpose() * wx);
    }
  }
  return out;
}

double loglik(const MixtureParams& params, const Dataset& data) {
  require(params.p() == data.p() && params.q() == data.q(),
          "loglik: params/data dimension mismatch");
  Matrix logdens = log_weighted_densities(params, data);
  Vector rowmax = logdens.rowwise().maxCoeff();
  Vector lse =
      rowmax.array() +
      (logdens.colwise() - rowmax).array().exp().rowwise().sum().log();
  return lse.mean();
}

double group_penalty_norm(const std::vector<Matrix>& beta) {
  if (beta.empty()) return 0.0;
  Matrix sq = Matrix::Zero(beta.front().rows(), beta.front().cols());
  for (const Matrix& b : beta) sq.array() += b.array().square();
  return sq.array().sqrt().sum();
}

double penalized_loglik(const MixtureParams& params, const Dataset& data, double lambda) {
  require(lambda >= 0.0, "penalized_loglik: lambda must be nonnegative");
  return loglik(params, data) - 0.5 * lambda * group_penalty_norm(params.beta);
}

double update_sigma2(const Responsibilities& eta, const MixtureParams& params,
                     const Dataset& data) {
  require(data.q() == 1 && params.q() == 1, "update_sigma2: univariate responses only");
  require(eta.n() == data.n() && eta.k() == params.k(),
          "update_sigma2: eta dimension mismatch");
  double total = 0.0;
  for (int j = 0; j < params.k(); ++j) {
    Vector resid = data.y.col(0) - data.x * params.beta[j].col(0);
    total += (eta.eta.col(j).array() * resid.array().square()).sum();
  }
  const double s2 = total / static_cast<double>(data.n());
  if (s2 <= 0.0)
    throw degenerate_fit_error("update_sigma2: zero residual mass (exact interpolation)");
  return s2;
}

std::vector<int> assign_labels(const Responsibilities& eta) {
  std::vector<int> labels(static_cast<std::size_t>(eta.n()));
  for (Index i = 0; i < eta.n(); ++i) {
    int best = 0;
    for (int j = 1; j < eta.k(); ++j)
      if (eta.eta(i, j) > eta.eta(i, best)) best = j;
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

}  // namespace mixlasso
