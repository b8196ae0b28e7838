#include "mixlasso/multivariate.hpp"

#include "em_core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace mixlasso {

namespace {

struct Whitener {
  bool identity = true;
  Matrix isqrt;   // sigma_y^{-1/2}
  Matrix sqrt_;   // sigma_y^{1/2}
  double logdet = 0.0;
};

Whitener make_whitener(const Matrix& sigma_y, Index q) {
  Whitener w;
  if (sigma_y.size() == 0) return w;
  if (sigma_y.rows() != q || sigma_y.cols() != q)
    throw std::invalid_argument("mv_em_fit: sigma_y must be q x q");
  if (!sigma_y.isApprox(sigma_y.transpose(), 1e-12))
    throw std::invalid_argument("mv_em_fit: sigma_y must be symmetric");
  if (sigma_y.isIdentity(0.0)) return w;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_y);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("mv_em_fit: sigma_y must be positive definite");
  const Vector d = eig.eigenvalues();
  const Matrix& v = eig.eigenvectors();
  w.identity = false;
  w.isqrt = v * d.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  w.sqrt_ = v * d.cwiseSqrt().asDiagonal() * v.transpose();
  w.logdet = d.array().log().sum();
  return w;
}

MixtureParams whiten_params(const MixtureParams& params, const Whitener& w) {
  MixtureParams out = params;
  out.sigma_y.reset();
  out.sigma2 = 1.0;
  if (!w.identity)
    for (Matrix& b : out.beta) b = b * w.isqrt;
  return out;
}

void unwhiten_fit(FitResult& fit, const Whitener& w, const Matrix& sigma_y, Index q) {
  if (!w.identity) {
    for (Matrix& b : fit.params.beta) b = b * w.sqrt_;
    const double shift = 0.5 * w.logdet;
    for (EMIterationRecord& r : fit.trace.records) {
      r.loglik -= shift;
      r.penalized_loglik -= shift;
    }
  }
  fit.params.sigma_y =
      sigma_y.size() == 0 ? Matrix(Matrix::Identity(q, q)) : sigma_y;
}

}  // namespace

FitResult mv_em_fit(const Dataset& data, const MixtureParams& init, const MVEMConfig& config) {
  Whitener w = make_whitener(config.sigma_y, data.q());
  EMConfig cfg = config.base;
  cfg.sigma2 = NoiseRule::fixed(1.0);
  Dataset white(data.x, w.identity ? data.y : Matrix(data.y * w.isqrt));
  detail::EmContext ctx(white);
  FitResult fit = detail::em_fit_core(ctx, whiten_params(init, w), cfg);
  unwhiten_fit(fit, w, config.sigma_y, data.q());
  return fit;
}

std::vector<FitResult> mv_fit_path(const Dataset& data, const MixtureParams& init,
                                   const std::vector<double>& lambdas,
                                   const MVEMConfig& config) {
  Whitener w = make_whitener(config.sigma_y, data.q());
  EMConfig cfg = config.base;
  cfg.sigma2 = NoiseRule::fixed(1.0);
  Dataset white(data.x, w.identity ? data.y : Matrix(data.y * w.isqrt));
  detail::EmContext ctx(white);
  std::vector<FitResult> path = detail::fit_path_core(ctx, whiten_params(init, w), lambdas, cfg);
  for (FitResult& fit : path) unwhiten_fit(fit, w, config.sigma_y, data.q());
  return path;
}

std::vector<double> mv_make_lambda_grid(const Dataset& data, const MixtureParams& init,
                                        const MVEMConfig& config, int n_points,
                                        double min_ratio) {
  Whitener w = make_whitener(config.sigma_y, data.q());
  Dataset white(data.x, w.identity ? data.y : Matrix(data.y * w.isqrt));
  return make_lambda_grid(white, whiten_params(init, w), n_points, min_ratio);
}

double mv_group_norm(const std::vector<Matrix>& beta) { return group_penalty_norm(beta); }

}  // namespace mixlasso
