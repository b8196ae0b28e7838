#include "mixlasso/init.hpp"

#include "mixlasso/multivariate.hpp"
#include "rng_detail.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mixlasso {

namespace {

int default_screen_size(Index n, Index p) {
  const int m = static_cast<int>(2.0 * static_cast<double>(n) /
                                 std::log(static_cast<double>(n)));
  return std::max(1, std::min<int>(m, static_cast<int>(p)));
}

Matrix select_columns(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = x.col(cols[i]);
  return out;
}

// Ridge-stabilized least squares; the jitter only matters for tiny or
// collinear splits.
Vector ridge_solve(const Matrix& x, const Vector& y) {
  const double n = static_cast<double>(x.rows());
  Matrix gram = x.transpose() * x / n;
  gram.diagonal().array() += 1e-8 * (1.0 + gram.diagonal().mean());
  return Eigen::LDLT<Matrix>(gram).solve(x.transpose() * y / n);
}

double pooled_lambda_max(const Dataset& data, int k) {
  // lambda_max at uniform responsibilities eta_ik = 1/K:
  // each group norm is ||x^T y / n||_inf scaled by sqrt(K)/K.
  const double n = static_cast<double>(data.n());
  Matrix pooled = data.x.transpose() * data.y / n;  // p x q
  const double mx = pooled.array().abs().maxCoeff();
  return 2.0 * mx / std::sqrt(static_cast<double>(k));
}

Matrix random_responsibilities(Index n, int k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix eta(n, k);
  for (Index i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < k; ++j) {
      const double e = -std::log(1.0 - unif(rng));  // Exp(1) -> flat Dirichlet rows
      eta(i, j) = e;
      row_sum += e;
    }
    eta.row(i) /= row_sum;
  }
  return eta;
}

MixtureParams params_from_eta(const Matrix& eta, const Dataset& data, double lambda,
                              double sigma2) {
  WeightedMoments mom = weighted_moments(Responsibilities{eta}, data);
  MStepProblem prob{std::move(mom.sigma_hat), std::move(mom.rho_hat), lambda};
  SolverReport rep = solve_mstep(prob);
  MixtureParams out;
  out.omega = mom.omega_hat.cwiseMax(1e-6);
  out.omega /= out.omega.sum();
  out.beta = std::move(rep.beta);
  out.sigma2 = sigma2;
  return out;
}

// Split samples by pooled-fit residuals (sign for two mixtures, quantile bins
// otherwise) and fit least squares per split.
MixtureParams residual_split_candidate(const Dataset& data, int k, double sigma2) {
  const Index n = data.n();
  Vector pooled = ridge_solve(data.x, data.y.col(0));
  Vector resid = data.y.col(0) - data.x * pooled;

  std::vector<int> bin(static_cast<std::size_t>(n));
  if (k == 1) {
    std::fill(bin.begin(), bin.end(), 0);
  } else if (k == 2) {
    for (Index i = 0; i < n; ++i) bin[static_cast<std::size_t>(i)] = resid[i] >= 0.0 ? 1 : 0;
  } else {
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return resid[a] < resid[b]; });
    for (Index r = 0; r < n; ++r)
      bin[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] =
          std::min<int>(k - 1, static_cast<int>((r * k) / n));
  }

  MixtureParams out = MixtureParams::zero(k, data.p(), 1);
  out.sigma2 = sigma2;
  for (int j = 0; j < k; ++j) {
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i)
      if (bin[static_cast<std::size_t>(i)] == j) rows.push_back(i);
    out.omega[j] = std::max<double>(static_cast<double>(rows.size()), 1.0);
    if (rows.empty()) {
      out.beta[j].col(0) = pooled;
      continue;
    }
    Matrix xs(static_cast<Index>(rows.size()), data.p());
    Vector ys(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xs.row(static_cast<Index>(r)) = data.x.row(rows[r]);
      ys[static_cast<Index>(r)] = data.y(rows[r], 0);
    }
    out.beta[j].col(0) = ridge_solve(xs, ys);
  }
  out.omega /= out.omega.sum();
  return out;
}

struct ScreenResult {
  std::vector<Index> support;
  double sigma2 = 1.0;  // pooled residual variance at the selected lasso fit
};

ScreenResult screen_predictors(const Dataset& data, int screen_size) {
  ScreenResult out;
  Vector coef = lasso_regression_bic(data.x, data.y.col(0));
  Vector resid = data.y.col(0) - data.x * coef;
  out.sigma2 = std::max(resid.squaredNorm() / static_cast<double>(data.n()), 1e-8);

  std::vector<Index> nonzero;
  for (Index j = 0; j < coef.size(); ++j)
    if (coef[j] != 0.0) nonzero.push_back(j);
  std::sort(nonzero.begin(), nonzero.end(),
            [&](Index a, Index b) { return std::abs(coef[a]) > std::abs(coef[b]); });
  if (static_cast<int>(nonzero.size()) > screen_size) nonzero.resize(screen_size);
  std::sort(nonzero.begin(), nonzero.end());
  out.support = std::move(nonzero);
  return out;
}

MixtureParams embed(const MixtureParams& screened, const std::vector<Index>& support,
                    Index p) {
  MixtureParams out = MixtureParams::zero(screened.k(), p, screened.q());
  out.omega = screened.omega;
  out.sigma2 = screened.sigma2;
  for (int k = 0; k < screened.k(); ++k)
    for (std::size_t i = 0; i < support.size(); ++i)
      out.beta[k].row(support[i]) = screened.beta[k].row(static_cast<Index>(i));
  return out;
}

MixtureParams oracle_perturb_impl(const MixtureParams& truth, double radius,
                                  std::uint64_t seed) {
  truth.validate();
  MixtureParams out = truth;
  if (radius <= 0.0) return out;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<Matrix> dir(out.beta.size());
  double norm2 = 0.0;
  for (std::size_t k = 0; k < out.beta.size(); ++k) {
    dir[k] = out.beta[k].unaryExpr([&](double) { return gauss(rng); });
    norm2 += dir[k].squaredNorm();
  }
  const double target = radius * unif(rng);
  if (norm2 > 0.0) {
    const double scale = target / std::sqrt(norm2);
    for (std::size_t k = 0; k < out.beta.size(); ++k) out.beta[k] += scale * dir[k];
  }

  if (out.k() > 1) {
    const double delta = (2.0 * unif(rng) - 1.0) * radius;
    const double lo = 1e-4;
    const double hi = 1.0 - lo * (out.k() - 1);
    const double w1 = std::clamp(out.omega[0] + delta, lo, hi);
    const double scale = (1.0 - w1) / (1.0 - out.omega[0]);
    out.omega *= scale;
    out.omega[0] = w1;
    out.omega = out.omega.cwiseMax(lo);
    out.omega /= out.omega.sum();
  }
  return out;
}

}  // namespace

Vector lasso_regression_bic(const Matrix& x, const Vector& y, int grid_points,
                            double min_ratio) {
  const double n = static_cast<double>(x.rows());
  MStepProblem prob;
  prob.sigma_hat.push_back(x.transpose() * x / n);
  prob.rho_hat.push_back(x.transpose() * y / n);
  const double lmax = lambda_max(prob.rho_hat);
  if (lmax <= 0.0) return Vector::Zero(x.cols());

  Vector best = Vector::Zero(x.cols());
  double best_bic = std::numeric_limits<double>::infinity();
  std::vector<Matrix> warm{Matrix::Zero(x.cols(), 1)};
  const double step = std::log(min_ratio) / std::max(1, grid_points - 1);
  for (int i = 0; i < grid_points; ++i) {
    prob.lambda = lmax * std::exp(step * i);
    SolverReport rep = solve_mstep(prob, &warm);
    warm = rep.beta;
    const double rss = (y - x * rep.beta[0].col(0)).squaredNorm();
    const double df = static_cast<double>(nonzero_group_count(rep.beta));
    const double bic = n * std::log(std::max(rss / n, 1e-300)) + df * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      best = rep.beta[0].col(0);
    }
  }
  return best;
}

MixtureParams initialize(const Dataset& data, int k, const InitStrategy& strategy) {
  if (k < 1) throw std::invalid_argument("initialize: k must be at least 1");
  if (strategy.variant == InitStrategy::Variant::OraclePerturb)
    return oracle_perturb_impl(strategy.truth, strategy.radius, strategy.seed);
  if (data.q() != 1)
    throw std::invalid_argument("initialize: univariate responses only (use mv_initialize)");
  if (strategy.restarts < 1) throw std::invalid_argument("initialize: restarts must be >= 1");

  const int m = strategy.screen_size > 0
                    ? std::min<int>(strategy.screen_size, static_cast<int>(data.p()))
                    : default_screen_size(data.n(), data.p());
  ScreenResult screen = screen_predictors(data, m);

  bool spectral = strategy.variant == InitStrategy::Variant::ScreenSpectral;
  if (spectral && screen.support.empty()) spectral = false;  // all-null lasso

  std::vector<Index> cols = screen.support;
  if (cols.empty())
    for (Index j = 0; j < data.p(); ++j) cols.push_back(j);
  Dataset screened(select_columns(data.x, cols), data.y);

  // Candidate polish runs at half the all-zero threshold; pure random
  // restarts on a healthy screen use the unpenalized M-step instead.
  double lambda_c = 0.5 * pooled_lambda_max(screened, k);
  if (!spectral && !screen.support.empty() && screened.p() < screened.n()) lambda_c = 0.0;

  EMConfig polish;
  polish.k = k;
  polish.lambda = LambdaRule::fixed(lambda_c);
  polish.sigma2 = NoiseRule::adaptive(screen.sigma2);
  polish.max_iter = std::max(1, strategy.short_iters);
  polish.solver_tol = 1e-7;

  std::mt19937_64 rng(strategy.seed);
  MixtureParams best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < strategy.restarts; ++c) {
    MixtureParams cand =
        (spectral && c == 0)
            ? residual_split_candidate(screened, k, screen.sigma2)
            : params_from_eta(random_responsibilities(screened.n(), k, rng), screened,
                              lambda_c, screen.sigma2);
    FitResult polished = em_fit(screened, cand, polish);
    const double value = penalized_loglik(polished.params, screened, lambda_c);
    if (value > best_value) {
      best_value = value;
      best = polished.params;
    }
  }
  return embed(best, cols, data.p());
}

MixtureParams mv_initialize(const Dataset& data, int k, const InitStrategy& strategy) {
  if (strategy.variant == InitStrategy::Variant::OraclePerturb)
    return oracle_perturb_impl(strategy.truth, strategy.radius, strategy.seed);
  if (data.q() == 1) return initialize(data, k, strategy);

  const double lambda_c = 0.5 * pooled_lambda_max(data, k);
  MVEMConfig polish;
  polish.base.k = k;
  polish.base.lambda = LambdaRule::fixed(lambda_c);
  polish.base.max_iter = std::max(1, strategy.short_iters);

  MixtureParams best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Index l = 0; l < data.q(); ++l) {
    InitStrategy column_strategy = strategy;
    column_strategy.seed = detail::mix_seed(strategy.seed, static_cast<std::uint64_t>(l));
    Dataset column(data.x, data.y.col(l));
    MixtureParams uni = initialize(column, k, column_strategy);

    // Transfer the column's mixture structure to a joint candidate through
    // one responsibility-weighted M-step on the full response.
    Responsibilities eta = responsibilities(uni, column);
    MixtureParams cand = params_from_eta(eta.eta, data, lambda_c, 1.0);

    FitResult polished = mv_em_fit(data, cand, polish);
    const double value = penalized_loglik(polished.params, data, lambda_c);
    if (value > best_value) {
      best_value = value;
      best = polished.params;
    }
  }
  return best;
}

std::pair<Responsibilities, std::vector<int>> init_responsibility_eval(
    const MixtureParams& init, const Dataset& data) {
  Responsibilities eta = responsibilities(init, data);
  std::vector<int> labels = assign_labels(eta);
  return {std::move(eta), std::move(labels)};
}

}  // namespace mixlasso
