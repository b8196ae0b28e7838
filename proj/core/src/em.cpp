#include "mixlasso/em.hpp"

#include "em_core.hpp"
#include "gmd_detail.hpp"

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace mixlasso {

namespace detail {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kOmegaCollapse = 1e-3;
constexpr double kSigma2Floor = 1e-8;

// Weighted-gram view used by the M-step: columns of
// sigma_hat_k = (1/n) sum_i eta_ik x_i x_i^T are materialized on first touch
// and cached for the rest of the solve. The last slice is closed against the
// full gram so the slices partition x^T x / n.
struct LazyQuad {
  const Matrix& x;
  const Matrix& eta;
  const EmContext& ctx;
  Matrix diags;  // p x K
  mutable std::vector<std::unique_ptr<Matrix>> cols;  // j -> p x K

  LazyQuad(const Matrix& x_in, const Matrix& eta_in, const EmContext& ctx_in)
      : x(x_in), eta(eta_in), ctx(ctx_in), cols(static_cast<std::size_t>(x_in.cols())) {
    const int nk = static_cast<int>(eta.cols());
    const double n = static_cast<double>(x.rows());
    diags.resize(x.cols(), nk);
    for (int k = 0; k + 1 < nk; ++k)
      diags.col(k) = ctx.xsq.transpose() * (eta.col(k) / n);
    diags.col(nk - 1) = ctx.gram.diagonal();
    for (int k = 0; k + 1 < nk; ++k) diags.col(nk - 1) -= diags.col(k);
  }

  Index dim() const { return x.cols(); }
  int slices() const { return static_cast<int>(eta.cols()); }
  double diag(int k, Index j) const { return diags(j, k); }

  const Matrix& columns(Index j) const {
    auto& slot = cols[static_cast<std::size_t>(j)];
    if (!slot) {
      const int nk = slices();
      const double n = static_cast<double>(x.rows());
      auto out = std::make_unique<Matrix>(x.cols(), nk);
      for (int k = 0; k + 1 < nk; ++k)
        out->col(k) = x.transpose() * (eta.col(k).cwiseProduct(x.col(j)) / n);
      out->col(nk - 1) = ctx.gram.col(j);
      for (int k = 0; k + 1 < nk; ++k) out->col(nk - 1) -= out->col(k);
      slot = std::move(out);
    }
    return *slot;
  }

  void axpy_col(int k, Index j, double a, Eigen::Ref<Vector> out) const {
    out += a * columns(j).col(k);
  }

  Matrix apply(int k, const Matrix& b) const {
    const double n = static_cast<double>(x.rows());
    if (k + 1 == slices()) {
      Matrix rest = ctx.gram * b;
      for (int kk = 0; kk + 1 < slices(); ++kk)
        rest -= x.transpose() *
                ((x * b).array().colwise() * (eta.col(kk).array() / n)).matrix();
      return rest;
    }
    Matrix xb = x * b;
    return x.transpose() * (xb.array().colwise() * (eta.col(k).array() / n)).matrix();
  }
};

struct EStep {
  Matrix eta;     // n x K
  double loglik;  // per-sample average
};

EStep estep(const MixtureParams& params, const Dataset& data) {
  const Index q = data.q();
  const double s2 = params.sigma2;
  const double cnst = -0.5 * q * (kLog2Pi + std::log(s2));
  Matrix logdens(data.n(), params.k());
  for (int k = 0; k < params.k(); ++k) {
    Matrix resid = data.y - data.x * params.beta[k];
    logdens.col(k) = std::log(params.omega[k]) + cnst -
                     resid.rowwise().squaredNorm().array() / (2.0 * s2);
  }
  if (!logdens.allFinite())
    throw std::runtime_error("em_fit: non-finite log-density during E-step");
  Vector rowmax = logdens.rowwise().maxCoeff();
  Matrix shifted = (logdens.colwise() - rowmax).array().exp();
  Vector rowsum = shifted.rowwise().sum();
  EStep out;
  out.loglik = (rowmax.array() + rowsum.array().log()).mean();
  shifted.array().colwise() /= rowsum.array();
  out.eta = std::move(shifted);
  return out;
}

std::vector<Matrix> weighted_rho(const Matrix& eta, const Dataset& data) {
  const double n = static_cast<double>(data.n());
  std::vector<Matrix> rho;
  rho.reserve(static_cast<std::size_t>(eta.cols()));
  for (Index k = 0; k < eta.cols(); ++k)
    rho.push_back(data.x.transpose() *
                  (data.y.array().colwise() * (eta.col(k).array() / n)).matrix());
  return rho;
}

void check_config(const EMConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("EMConfig: k must be at least 1");
  if (cfg.max_iter < 1) throw std::invalid_argument("EMConfig: max_iter must be at least 1");
  if (cfg.conv_tol <= 0.0) throw std::invalid_argument("EMConfig: conv_tol must be positive");
  if (cfg.solver_tol <= 0.0) throw std::invalid_argument("EMConfig: solver_tol must be positive");
  if (cfg.lambda.mode == LambdaRule::Mode::Fixed) {
    if (cfg.lambda.value < 0.0) throw std::invalid_argument("EMConfig: negative lambda");
  } else {
    if (!(cfg.lambda.kappa > 0.0 && cfg.lambda.kappa < 0.5))
      throw std::invalid_argument("EMConfig: schedule kappa must lie in (0, 1/2)");
  }
  if (cfg.sigma2.sigma2 <= 0.0) throw std::invalid_argument("EMConfig: sigma2 must be positive");
}

}  // namespace

EmContext::EmContext(const Dataset& d) : data(&d) {
  const double n = static_cast<double>(d.n());
  gram = d.x.transpose() * d.x / n;
  xsq = d.x.array().square();
}

FitResult em_fit_core(const EmContext& ctx, MixtureParams params, const EMConfig& cfg) {
  const Dataset& data = *ctx.data;
  check_config(cfg);
  params.validate();
  if (params.k() != cfg.k) throw std::invalid_argument("em_fit: init K differs from config K");
  if (params.p() != data.p() || params.q() != data.q())
    throw std::invalid_argument("em_fit: init/data dimension mismatch");
  if (params.sigma_y)
    throw std::invalid_argument("em_fit: full sigma_y is handled by the multivariate front end");
  params.sigma2 = cfg.sigma2.sigma2;

  FitResult out;
  EMTrace& trace = out.trace;

  double lambda_t = cfg.lambda.value;
  EStep e = estep(params, data);

  auto record_state = [&](int iteration, double lambda, double loglik, double delta,
                          const SolverReport* rep) {
    EMIterationRecord r;
    r.iteration = iteration;
    r.lambda = lambda;
    r.loglik = loglik;
    r.penalized_loglik = loglik - 0.5 * lambda * group_penalty_norm(params.beta);
    r.omega = params.omega;
    r.delta_beta = delta;
    r.sigma2 = params.sigma2;
    if (rep) {
      r.solver_sweeps = rep->iterations;
      r.solver_kkt_gap = rep->final_kkt_gap;
      r.solver_converged = rep->converged;
    }
    trace.records.push_back(std::move(r));
  };

  record_state(0, lambda_t, e.loglik, 0.0, nullptr);

  for (int t = 0; t < cfg.max_iter; ++t) {
    Vector omega_hat = e.eta.colwise().mean();
    if (omega_hat.minCoeff() < kOmegaCollapse) {
      trace.degenerate = true;
      std::ostringstream msg;
      msg << "iteration " << t + 1 << ": mixture weight collapsed to "
          << omega_hat.minCoeff() << "; fit stopped";
      trace.warnings.push_back(msg.str());
      break;
    }

    std::vector<Matrix> rho = weighted_rho(e.eta, data);
    const double lambda_next =
        lambda_schedule_next(lambda_t, cfg.lambda, data.n(), data.p() * data.q());

    LazyQuad quad(data.x, e.eta, ctx);
    SolverReport rep = gmd_solve(quad, rho, lambda_next, &params.beta, cfg.solver_tol,
                                 cfg.solver_max_iter);
    if (!rep.converged) {
      std::ostringstream msg;
      msg << "iteration " << t + 1 << ": M-step stopped at the sweep cap with KKT gap "
          << rep.final_kkt_gap;
      trace.warnings.push_back(msg.str());
    }

    double delta2 = 0.0;
    for (int k = 0; k < cfg.k; ++k) delta2 += (rep.beta[k] - params.beta[k]).squaredNorm();
    const double delta = std::sqrt(delta2);

    params.beta = std::move(rep.beta);
    params.omega = std::move(omega_hat);
    lambda_t = lambda_next;

    if (cfg.sigma2.mode == NoiseRule::Mode::Adaptive) {
      EStep fresh = estep(params, data);
      try {
        params.sigma2 =
            std::max(update_sigma2(Responsibilities{fresh.eta}, params, data), kSigma2Floor);
      } catch (const degenerate_fit_error&) {
        params.sigma2 = kSigma2Floor;
        std::ostringstream msg;
        msg << "iteration " << t + 1 << ": adaptive sigma2 floored at " << kSigma2Floor
            << " (zero residual mass)";
        trace.warnings.push_back(msg.str());
      }
    }

    e = estep(params, data);
    record_state(t + 1, lambda_t, e.loglik, delta, &rep);
    out.iterations = t + 1;

    if (delta < cfg.conv_tol) {
      out.converged = true;
      break;
    }
  }

  out.params = std::move(params);
  out.eta = Responsibilities{std::move(e.eta)};
  out.support = nonzero_rows(out.params.beta);
  out.nonzero_groups = nonzero_group_count(out.params.beta);
  out.lambda = lambda_t;
  return out;
}

std::vector<FitResult> fit_path_core(const EmContext& ctx, const MixtureParams& init,
                                     const std::vector<double>& lambdas,
                                     const EMConfig& cfg) {
  if (lambdas.empty()) throw std::invalid_argument("fit_path: empty lambda grid");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] < lambdas[i - 1]))
      throw std::invalid_argument("fit_path: grid must be strictly descending");

  std::vector<FitResult> path;
  path.reserve(lambdas.size());
  MixtureParams warm = init;
  for (double lambda : lambdas) {
    EMConfig step = cfg;
    step.lambda = LambdaRule::fixed(lambda);
    if (cfg.sigma2.mode == NoiseRule::Mode::Adaptive)
      step.sigma2 = NoiseRule::adaptive(warm.sigma2);
    FitResult fit = em_fit_core(ctx, warm, step);
    fit.bic = bic_value(fit, *ctx.data);
    warm = fit.params;
    path.push_back(std::move(fit));
  }
  return path;
}

}  // namespace detail

double lambda_schedule_floor(double floor_coefficient, Index n, Index dim) {
  const double logn = std::log(static_cast<double>(n));
  return floor_coefficient * std::sqrt(std::log(static_cast<double>(dim)) * logn * logn /
                                       static_cast<double>(n));
}

double lambda_schedule_next(double lambda_t, double kappa, double floor_value) {
  return kappa * lambda_t + floor_value;
}

double lambda_schedule_next(double lambda_t, const LambdaRule& rule, Index n, Index dim) {
  if (rule.mode == LambdaRule::Mode::Fixed) return lambda_t;
  return lambda_schedule_next(lambda_t, rule.kappa,
                              lambda_schedule_floor(rule.floor_coefficient, n, dim));
}

FitResult em_fit(const Dataset& data, const MixtureParams& init, const EMConfig& config) {
  if (data.q() != 1)
    throw std::invalid_argument("em_fit: univariate responses only (use mv_em_fit)");
  detail::EmContext ctx(data);
  return detail::em_fit_core(ctx, init, config);
}

std::vector<double> make_lambda_grid(const Dataset& data, const MixtureParams& init,
                                     int n_points, double min_ratio) {
  if (n_points < 1) throw std::invalid_argument("make_lambda_grid: need at least one point");
  if (!(min_ratio > 0.0 && min_ratio < 1.0))
    throw std::invalid_argument("make_lambda_grid: min_ratio must lie in (0,1)");
  Responsibilities eta = responsibilities(init, data);
  const double lmax = lambda_max(detail::weighted_rho(eta.eta, data));
  if (lmax <= 0.0) return {0.0};
  if (n_points == 1) return {lmax};
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  const double step = std::log(min_ratio) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) grid[static_cast<std::size_t>(i)] = lmax * std::exp(step * i);
  return grid;
}

std::vector<FitResult> fit_path(const Dataset& data, const MixtureParams& init,
                                const std::vector<double>& lambdas, const EMConfig& config) {
  if (data.q() != 1)
    throw std::invalid_argument("fit_path: univariate responses only (use mv_fit_path)");
  detail::EmContext ctx(data);
  return detail::fit_path_core(ctx, init, lambdas, config);
}

double bic_value(const FitResult& fit, const Dataset& data) {
  const int k = fit.params.k();
  const double df = static_cast<double>(k) * fit.nonzero_groups + (k - 1) + 1;
  const double n = static_cast<double>(data.n());
  return -2.0 * n * loglik(fit.params, data) + df * std::log(n);
}

FitResult bic_select(const std::vector<FitResult>& path, const Dataset& data) {
  if (path.empty()) throw std::invalid_argument("bic_select: empty path");
  std::size_t best = 0;
  double best_bic = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.size(); ++i) {
    double bic = path[i].bic;
    if (std::isnan(bic)) bic = bic_value(path[i], data);
    if (bic < best_bic) {  // ties keep the earlier (larger-lambda) fit
      best_bic = bic;
      best = i;
    }
  }
  FitResult out = path[best];
  out.bic = best_bic;
  return out;
}

std::vector<Index> nonzero_rows(const std::vector<Matrix>& beta) {
  std::vector<Index> rows;
  if (beta.empty()) return rows;
  for (Index j = 0; j < beta.front().rows(); ++j) {
    bool nonzero = false;
    for (const Matrix& b : beta)
      if (!b.row(j).isZero(0.0)) {
        nonzero = true;
        break;
      }
    if (nonzero) rows.push_back(j);
  }
  return rows;
}

int nonzero_group_count(const std::vector<Matrix>& beta) {
  if (beta.empty()) return 0;
  int count = 0;
  for (Index l = 0; l < beta.front().cols(); ++l)
    for (Index j = 0; j < beta.front().rows(); ++j) {
      for (const Matrix& b : beta)
        if (b(j, l) != 0.0) {
          ++count;
          break;
        }
    }
  return count;
}

}  // namespace mixlasso
