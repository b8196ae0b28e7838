#include "mixlasso/simbench.hpp"

#include "mixlasso/multivariate.hpp"
#include "rng_detail.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mixlasso {

namespace {

Matrix select_columns(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = x.col(cols[i]);
  return out;
}

int nonzero_row_count(const SimSpec& spec) {
  if (spec.q <= 1) return spec.s;
  return static_cast<int>((spec.s + spec.q - 1) / spec.q);
}

double sgn(double v) { return v < 0.0 ? -1.0 : 1.0; }

struct CovarianceModel {
  CovarianceSpec spec;
  Matrix dense;  // materialized only for erdos-renyi

  Matrix block(const std::vector<Index>& idx) const {
    const Index m = static_cast<Index>(idx.size());
    Matrix out(m, m);
    switch (spec.kind) {
      case CovarianceSpec::Kind::Identity:
        out.setIdentity();
        break;
      case CovarianceSpec::Kind::Ar1:
        for (Index a = 0; a < m; ++a)
          for (Index b = 0; b < m; ++b)
            out(a, b) = std::pow(spec.rho, std::abs(static_cast<double>(idx[a] - idx[b])));
        break;
      case CovarianceSpec::Kind::ErdosRenyi:
        for (Index a = 0; a < m; ++a)
          for (Index b = 0; b < m; ++b) out(a, b) = dense(idx[a], idx[b]);
        break;
    }
    return out;
  }
};

Matrix erdos_renyi_covariance(Index p, const CovarianceSpec& cs, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(cs.prob);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> mag(cs.umin, cs.umax);
  Matrix raw = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (edge(rng)) raw(i, j) = coin(rng) ? mag(rng) : -mag(rng);

  Matrix sym = 0.5 * (raw + raw.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  sym.diagonal().array() += std::max(-eig.eigenvalues().minCoeff(), 0.0) + cs.shift;

  Vector dinv = sym.diagonal().cwiseSqrt().cwiseInverse();
  Matrix out = dinv.asDiagonal() * sym * dinv.asDiagonal();
  out.diagonal().setOnes();
  return out;
}

CovarianceModel build_covariance(const SimSpec& spec, std::mt19937_64& rng) {
  CovarianceModel cov{spec.covariance, {}};
  if (spec.covariance.kind != CovarianceSpec::Kind::ErdosRenyi) return cov;
  for (int attempt = 0; attempt < 5; ++attempt) {
    cov.dense = erdos_renyi_covariance(spec.p, spec.covariance, rng);
    Eigen::LLT<Matrix> llt(cov.dense);
    if (llt.info() == Eigen::Success) return cov;
  }
  throw std::runtime_error("generate: could not build a positive-definite covariance");
}

Matrix sample_x(const SimSpec& spec, const CovarianceModel& cov, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix z(spec.n, spec.p);
  for (Index i = 0; i < spec.n; ++i)
    for (Index j = 0; j < spec.p; ++j) z(i, j) = gauss(rng);

  switch (cov.spec.kind) {
    case CovarianceSpec::Kind::Identity:
      return z;
    case CovarianceSpec::Kind::Ar1: {
      // AR(1) rows via the recursion x_j = rho x_{j-1} + sqrt(1-rho^2) z_j.
      Matrix x(spec.n, spec.p);
      const double rho = cov.spec.rho;
      const double scale = std::sqrt(1.0 - rho * rho);
      x.col(0) = z.col(0);
      for (Index j = 1; j < spec.p; ++j) x.col(j) = rho * x.col(j - 1) + scale * z.col(j);
      return x;
    }
    case CovarianceSpec::Kind::ErdosRenyi: {
      Eigen::LLT<Matrix> llt(cov.dense);
      return z * llt.matrixL().transpose();
    }
  }
  return z;
}

MixtureParams make_truth(const SimSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int rows = nonzero_row_count(spec);
  MixtureParams truth = MixtureParams::zero(spec.k, spec.p, spec.q);
  truth.sigma2 = spec.sigma2_true;
  truth.omega = spec.omega.size() > 0 ? spec.omega
                                      : Vector::Constant(spec.k, 1.0 / spec.k);

  switch (spec.model) {
    case SimModel::M4: {
      if (spec.k != 3) throw std::invalid_argument("generate: M4 uses three mixtures");
      for (int j = 0; j < rows; ++j) {
        truth.beta[0](j, 0) = -1.0;
        truth.beta[1](j, 0) =
            rows == 1 ? 2.0 : 1.0 + 2.0 * static_cast<double>(j) / (rows - 1);
        truth.beta[2](j, 0) = 5.0;
      }
      break;
    }
    case SimModel::MV: {
      if (spec.k != 2) throw std::invalid_argument("generate: MV recipe uses two mixtures");
      for (int j = 0; j < rows; ++j)
        for (Index l = 0; l < spec.q; ++l) {
          const double b = gauss(rng);
          const double shift = l == 0 ? 2.0 : spec.delta;
          truth.beta[0](j, l) = b;
          truth.beta[1](j, l) = b + shift * sgn(b);
        }
      break;
    }
    default: {  // M1, M2, M3, Custom: Gaussian base signal, sign-aligned shifts
      for (int j = 0; j < rows; ++j) {
        const double b = gauss(rng);
        truth.beta[0](j, 0) = b;
        for (int k = 1; k < spec.k; ++k)
          truth.beta[k](j, 0) = b + k * spec.delta * sgn(b);
      }
      break;
    }
  }
  return truth;
}

double pairwise_snr(const MixtureParams& truth, const CovarianceModel& cov,
                    const std::vector<Index>& support, int a, int b) {
  if (support.empty()) return 0.0;
  const Index m = static_cast<Index>(support.size());
  Matrix diff(m, truth.q());
  for (Index r = 0; r < m; ++r)
    diff.row(r) = truth.beta[b].row(support[static_cast<std::size_t>(r)]) -
                  truth.beta[a].row(support[static_cast<std::size_t>(r)]);
  const Matrix sig = cov.block(support);
  const double quad = (diff.transpose() * sig * diff).trace();
  const double delta = std::sqrt(std::max(quad, 0.0));
  return truth.q() > 1 ? delta / static_cast<double>(truth.q()) : delta;
}

}  // namespace

SimSpec SimSpec::model_defaults(SimModel model) {
  SimSpec spec;
  spec.model = model;
  switch (model) {
    case SimModel::M1:
      break;
    case SimModel::M2:
      spec.delta = 1.0;
      break;
    case SimModel::M3:
      spec.covariance = CovarianceSpec::erdos_renyi();
      break;
    case SimModel::M4:
      spec.n = 600;
      spec.k = 3;
      break;
    case SimModel::MV:
      spec.p = 100;
      spec.q = 2;
      spec.delta = 0.5;
      break;
    case SimModel::Custom:
      break;
  }
  return spec;
}

SimDraw generate(const SimSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("generate: need n >= 2");
  if (spec.s < 0 || spec.s > spec.p * spec.q)
    throw std::invalid_argument("generate: s out of range");
  if (spec.k < 1) throw std::invalid_argument("generate: k must be positive");
  if (spec.sigma2_true <= 0.0) throw std::invalid_argument("generate: sigma2_true must be positive");
  if (spec.omega.size() > 0) {
    if (spec.omega.size() != spec.k || (spec.omega.array() <= 0.0).any() ||
        std::abs(spec.omega.sum() - 1.0) > 1e-10)
      throw std::invalid_argument("generate: omega must be a positive K-simplex vector");
  }

  std::mt19937_64 rng(spec.seed);
  CovarianceModel cov = build_covariance(spec, rng);
  MixtureParams truth = make_truth(spec, rng);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> w(static_cast<std::size_t>(spec.n));
  for (Index i = 0; i < spec.n; ++i) {
    const double u = unif(rng);
    double acc = 0.0;
    int label = spec.k - 1;
    for (int k = 0; k < spec.k; ++k) {
      acc += truth.omega[k];
      if (u <= acc) {
        label = k;
        break;
      }
    }
    w[static_cast<std::size_t>(i)] = label;
  }

  Matrix x = sample_x(spec, cov, rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  const double noise_scale = std::sqrt(spec.sigma2_true);
  Matrix y(spec.n, spec.q);
  std::vector<Matrix> signal(static_cast<std::size_t>(spec.k));
  for (int k = 0; k < spec.k; ++k) signal[static_cast<std::size_t>(k)] = x * truth.beta[k];
  for (Index i = 0; i < spec.n; ++i) {
    y.row(i) = signal[static_cast<std::size_t>(w[static_cast<std::size_t>(i)])].row(i);
    for (Index l = 0; l < spec.q; ++l) y(i, l) += noise_scale * gauss(rng);
  }

  SimDraw draw;
  draw.dataset = Dataset(std::move(x), std::move(y));
  draw.true_w = std::move(w);
  draw.true_support = nonzero_rows(truth.beta);

  double snr = std::numeric_limits<double>::infinity();
  for (int a = 0; a < spec.k; ++a)
    for (int b = a + 1; b < spec.k; ++b)
      snr = std::min(snr, pairwise_snr(truth, cov, draw.true_support, a, b));
  draw.snr = std::isfinite(snr) ? snr : 0.0;
  draw.truth = std::move(truth);
  return draw;
}

namespace {

// Visit all K! index permutations; returns the one minimizing `error` along
// with its value. Ties keep the lexicographically first permutation.
template <class ErrorFn>
std::pair<std::vector<int>, double> best_permutation(int k, ErrorFn error) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_err = error(perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double e = error(perm);
    if (e < best_err) {
      best_err = e;
      best = perm;
    }
  }
  return {best, best_err};
}

double label_error_percent(const std::vector<int>& fit_labels, const std::vector<int>& true_w,
                           const std::vector<int>& perm) {
  // perm maps truth index -> fit index; invert it to translate fit labels.
  std::vector<int> inverse(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k)
    inverse[static_cast<std::size_t>(perm[k])] = static_cast<int>(k);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < true_w.size(); ++i)
    if (inverse[static_cast<std::size_t>(fit_labels[i])] != true_w[i]) ++wrong;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(true_w.size());
}

}  // namespace

MetricBundle score_params(const MixtureParams& fit_params, const std::vector<int>* fit_labels,
                          const MixtureParams& truth, const std::vector<Index>& true_support,
                          const std::vector<int>* true_w, Index p) {
  if (fit_params.k() != truth.k())
    throw std::invalid_argument("score_params: mixture counts differ");
  const int k = truth.k();
  if (k > 8) throw std::invalid_argument("score_params: permutation search capped at K = 8");

  auto beta_err = [&](const std::vector<int>& perm) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j)
      sum += (fit_params.beta[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] -
              truth.beta[static_cast<std::size_t>(j)])
                 .squaredNorm();
    return std::sqrt(sum);
  };
  auto [perm, err] = best_permutation(k, beta_err);

  MetricBundle out;
  out.beta_error = err;
  for (int j = 0; j < k; ++j)
    out.omega_error +=
        100.0 * std::abs(fit_params.omega[perm[static_cast<std::size_t>(j)]] - truth.omega[j]);
  if (fit_labels && true_w) out.label_error = label_error_percent(*fit_labels, *true_w, perm);

  std::vector<Index> fit_support = nonzero_rows(fit_params.beta);
  std::size_t hits = 0;
  for (Index j : fit_support)
    if (std::binary_search(true_support.begin(), true_support.end(), j)) ++hits;
  const std::size_t s = true_support.size();
  const std::size_t nulls = static_cast<std::size_t>(p) - s;
  out.tpr = s == 0 ? 100.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(s);
  out.fpr = nulls == 0
                ? 0.0
                : 100.0 * static_cast<double>(fit_support.size() - hits) /
                      static_cast<double>(nulls);
  return out;
}

MetricBundle align_and_score(const FitResult& fit, const SimDraw& draw) {
  std::vector<int> labels = assign_labels(fit.eta);
  MetricBundle out = score_params(fit.params, &labels, draw.truth, draw.true_support,
                                  &draw.true_w, draw.dataset.p());
  out.degenerate = fit.trace.degenerate;
  return out;
}

namespace {

MixtureParams restrict_params(const MixtureParams& params, const std::vector<Index>& cols) {
  MixtureParams out = params;
  for (Matrix& b : out.beta) {
    Matrix r(static_cast<Index>(cols.size()), b.cols());
    for (std::size_t i = 0; i < cols.size(); ++i) r.row(static_cast<Index>(i)) = b.row(cols[i]);
    b = std::move(r);
  }
  return out;
}

FitResult embed_fit(FitResult fit, const std::vector<Index>& cols, Index p) {
  for (Matrix& b : fit.params.beta) {
    Matrix full = Matrix::Zero(p, b.cols());
    for (std::size_t i = 0; i < cols.size(); ++i) full.row(cols[i]) = b.row(static_cast<Index>(i));
    b = std::move(full);
  }
  fit.support = nonzero_rows(fit.params.beta);
  fit.nonzero_groups = nonzero_group_count(fit.params.beta);
  return fit;
}

FitResult pem_fit(const Dataset& data, int k, const PipelineConfig& pc, std::uint64_t seed) {
  MixtureParams init =
      initialize(data, k, InitStrategy::screen_spectral(pc.screen_size, pc.restarts, seed));
  EMConfig cfg;
  cfg.k = k;
  cfg.sigma2 = NoiseRule::fixed(pc.sigma2_fit);
  cfg.max_iter = pc.max_iter;
  cfg.conv_tol = pc.conv_tol;
  std::vector<double> grid = make_lambda_grid(data, init, pc.grid_points, pc.grid_min_ratio);
  if (grid.size() == 1) {
    cfg.lambda = LambdaRule::fixed(grid.front());
    FitResult fit = em_fit(data, init, cfg);
    fit.bic = bic_value(fit, data);
    return fit;
  }
  return bic_select(fit_path(data, init, grid, cfg), data);
}

FitResult oracle_fit(const SimDraw& draw, const PipelineConfig& pc, std::uint64_t seed) {
  std::vector<Index> cols = draw.true_support;
  if (cols.empty())
    for (Index j = 0; j < draw.dataset.p(); ++j) cols.push_back(j);
  Dataset restricted(select_columns(draw.dataset.x, cols), draw.dataset.y);
  MixtureParams truth_r = restrict_params(draw.truth, cols);
  MixtureParams init =
      initialize(restricted, draw.truth.k(),
                 InitStrategy::oracle_perturb(truth_r, pc.oracle_radius, seed));
  EMConfig cfg;
  cfg.k = draw.truth.k();
  cfg.lambda = LambdaRule::fixed(0.0);
  cfg.sigma2 = NoiseRule::adaptive(1.0);
  cfg.max_iter = pc.max_iter;
  cfg.conv_tol = pc.conv_tol;
  return embed_fit(em_fit(restricted, init, cfg), cols, draw.dataset.p());
}

FitResult psem_fit(const SimDraw& draw, const PipelineConfig& pc, std::uint64_t seed) {
  FitResult pem = pem_fit(draw.dataset, draw.truth.k(), pc, seed);
  if (pem.support.empty()) return pem;
  Dataset restricted(select_columns(draw.dataset.x, pem.support), draw.dataset.y);
  MixtureParams warm = restrict_params(pem.params, pem.support);
  EMConfig cfg;
  cfg.k = draw.truth.k();
  cfg.lambda = LambdaRule::fixed(0.0);
  cfg.sigma2 = NoiseRule::adaptive(std::max(pem.params.sigma2, 1e-8));
  cfg.max_iter = pc.max_iter;
  cfg.conv_tol = pc.conv_tol;
  FitResult fit = em_fit(restricted, warm, cfg);
  fit.trace.degenerate = fit.trace.degenerate || pem.trace.degenerate;
  return embed_fit(std::move(fit), pem.support, draw.dataset.p());
}

FitResult initial_baseline(const SimDraw& draw, const PipelineConfig& pc, std::uint64_t seed) {
  const Dataset& data = draw.dataset;
  const int k = draw.truth.k();
  MixtureParams init =
      initialize(data, k, InitStrategy::screen_spectral(pc.screen_size, pc.restarts, seed));
  auto [eta, labels] = init_responsibility_eval(init, data);

  FitResult out;
  out.params = MixtureParams::zero(k, data.p(), 1);
  out.params.omega = eta.eta.colwise().mean().cwiseMax(1e-6);
  out.params.omega /= out.params.omega.sum();
  out.params.sigma2 = init.sigma2;
  for (int j = 0; j < k; ++j) {
    std::vector<Index> rows;
    for (Index i = 0; i < data.n(); ++i)
      if (labels[static_cast<std::size_t>(i)] == j) rows.push_back(i);
    if (rows.size() < 2) continue;
    Matrix xs(static_cast<Index>(rows.size()), data.p());
    Vector ys(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xs.row(static_cast<Index>(r)) = data.x.row(rows[r]);
      ys[static_cast<Index>(r)] = data.y(rows[r], 0);
    }
    out.params.beta[static_cast<std::size_t>(j)].col(0) = lasso_regression_bic(xs, ys);
  }
  out.eta = std::move(eta);
  out.support = nonzero_rows(out.params.beta);
  out.nonzero_groups = nonzero_group_count(out.params.beta);
  return out;
}

template <class Fn>
void parallel_for(int count, Fn&& fn) {
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers = std::min<int>(count, hw > 1 ? static_cast<int>(hw) : 1);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&, t]() {
      for (int i = t; i < count; i += workers) fn(i);
    });
  for (std::thread& th : pool) th.join();
}

struct Welford {
  double sum = 0.0, sumsq = 0.0;
  int count = 0;
  void add(double v) {
    if (!std::isfinite(v)) return;
    sum += v;
    sumsq += v * v;
    ++count;
  }
  double mean() const { return count > 0 ? sum / count : 0.0; }
  double se() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sumsq - count * m * m) / (count - 1));
    return std::sqrt(var / count);
  }
};

void summarize(ReplicateTable& table) {
  Welford beta, omega, label, tpr, fpr;
  int degenerate = 0;
  for (const ReplicateRow& row : table.rows) {
    beta.add(row.metrics.beta_error);
    omega.add(row.metrics.omega_error);
    label.add(row.metrics.label_error);
    tpr.add(row.metrics.tpr);
    fpr.add(row.metrics.fpr);
    if (row.metrics.degenerate) ++degenerate;
  }
  table.mean = {beta.mean(), omega.mean(), label.mean(), tpr.mean(), fpr.mean(),
                degenerate > 0};
  table.se = {beta.se(), omega.se(), label.se(), tpr.se(), fpr.se(), degenerate > 0};
}

}  // namespace

FitResult run_pipeline(const SimDraw& draw, const PipelineConfig& config, std::uint64_t seed) {
  switch (config.pipeline) {
    case Pipeline::Oracle:
      return oracle_fit(draw, config, seed);
    case Pipeline::Pem:
      return pem_fit(draw.dataset, draw.truth.k(), config, seed);
    case Pipeline::Psem:
      return psem_fit(draw, config, seed);
    case Pipeline::Initial:
      return initial_baseline(draw, config, seed);
  }
  throw std::invalid_argument("run_pipeline: unknown pipeline");
}

ReplicateTable run_replicates(const SimSpec& spec, const PipelineConfig& config, int reps,
                              std::uint64_t base_seed) {
  if (reps < 1) throw std::invalid_argument("run_replicates: reps must be >= 1");
  ReplicateTable table;
  table.rows.resize(static_cast<std::size_t>(reps));

  parallel_for(reps, [&](int rep) {
    const std::uint64_t seed = detail::mix_seed(base_seed, static_cast<std::uint64_t>(rep));
    ReplicateRow& row = table.rows[static_cast<std::size_t>(rep)];
    row.rep = rep;
    row.seed = seed;
    try {
      SimSpec local = spec;
      local.seed = seed;
      SimDraw draw = generate(local);
      FitResult fit = run_pipeline(draw, config, detail::mix_seed(seed, 0x5eedULL));
      row.metrics = align_and_score(fit, draw);
    } catch (const std::exception&) {
      row.metrics = MetricBundle{};
      row.metrics.beta_error = std::numeric_limits<double>::quiet_NaN();
      row.metrics.omega_error = std::numeric_limits<double>::quiet_NaN();
      row.metrics.label_error = std::numeric_limits<double>::quiet_NaN();
      row.metrics.tpr = std::numeric_limits<double>::quiet_NaN();
      row.metrics.fpr = std::numeric_limits<double>::quiet_NaN();
      row.metrics.degenerate = true;
    }
  });

  summarize(table);
  return table;
}

std::vector<SigmaStudyCell> sigma_misspec_study(const std::vector<double>& deltas,
                                                const std::vector<double>& sigma2_inputs,
                                                int reps, std::uint64_t base_seed, Index n,
                                                Index p) {
  if (reps < 1) throw std::invalid_argument("sigma_misspec_study: reps must be >= 1");
  const std::size_t cells = deltas.size() * sigma2_inputs.size();
  std::vector<Welford> acc(cells);

  for (std::size_t di = 0; di < deltas.size(); ++di) {
    std::vector<std::vector<double>> errors(sigma2_inputs.size(),
                                            std::vector<double>(static_cast<std::size_t>(reps)));
    parallel_for(reps, [&](int rep) {
      SimSpec spec;
      spec.model = SimModel::Custom;
      spec.n = n;
      spec.p = p;
      spec.delta = deltas[di];
      spec.sigma2_true = 1.0;
      spec.seed = detail::mix_seed(base_seed, di * 1000003ULL + static_cast<std::uint64_t>(rep));
      SimDraw draw = generate(spec);
      for (std::size_t si = 0; si < sigma2_inputs.size(); ++si) {
        PipelineConfig pc;
        pc.pipeline = Pipeline::Pem;
        pc.sigma2_fit = sigma2_inputs[si];
        double err = std::numeric_limits<double>::quiet_NaN();
        try {
          FitResult fit = run_pipeline(draw, pc, detail::mix_seed(spec.seed, si));
          err = align_and_score(fit, draw).beta_error;
        } catch (const std::exception&) {
        }
        errors[si][static_cast<std::size_t>(rep)] = err;
      }
    });
    for (std::size_t si = 0; si < sigma2_inputs.size(); ++si)
      for (double e : errors[si]) acc[di * sigma2_inputs.size() + si].add(e);
  }

  std::vector<SigmaStudyCell> out;
  out.reserve(cells);
  for (std::size_t di = 0; di < deltas.size(); ++di)
    for (std::size_t si = 0; si < sigma2_inputs.size(); ++si) {
      const Welford& w = acc[di * sigma2_inputs.size() + si];
      out.push_back({deltas[di], sigma2_inputs[si], w.mean(), w.se()});
    }
  return out;
}

namespace {

double column_error(const std::vector<Matrix>& fit_beta, const MixtureParams& truth,
                    const std::vector<int>& perm, Index truth_col, Index fit_col) {
  double sum = 0.0;
  for (std::size_t k = 0; k < perm.size(); ++k)
    sum += (fit_beta[static_cast<std::size_t>(perm[k])].col(fit_col) -
            truth.beta[k].col(truth_col))
               .squaredNorm();
  return std::sqrt(sum);
}

}  // namespace

std::vector<MvComparisonRow> mv_joint_vs_separate(double delta, int reps,
                                                  std::uint64_t base_seed,
                                                  const PipelineConfig& config) {
  SimSpec spec = SimSpec::model_defaults(SimModel::MV);
  spec.delta = delta;
  std::vector<MvComparisonRow> rows(static_cast<std::size_t>(reps));

  parallel_for(reps, [&](int rep) {
    SimSpec local = spec;
    local.seed = detail::mix_seed(base_seed, static_cast<std::uint64_t>(rep));
    SimDraw draw = generate(local);
    const Dataset& data = draw.dataset;
    const std::uint64_t fit_seed = detail::mix_seed(local.seed, 0x10b5ULL);

    // Joint multivariate fit, BIC-tuned.
    MixtureParams init = mv_initialize(
        data, 2, InitStrategy::screen_spectral(config.screen_size, config.restarts, fit_seed));
    MVEMConfig mc;
    mc.base.k = 2;
    mc.base.max_iter = config.max_iter;
    mc.base.conv_tol = config.conv_tol;
    std::vector<double> grid =
        mv_make_lambda_grid(data, init, mc, config.grid_points, config.grid_min_ratio);
    FitResult joint = grid.size() == 1
                          ? mv_em_fit(data, init, mc)
                          : bic_select(mv_fit_path(data, init, grid, mc), data);

    // Per-response univariate fits.
    std::vector<FitResult> separate;
    for (Index l = 0; l < data.q(); ++l) {
      Dataset column(data.x, data.y.col(l));
      separate.push_back(
          pem_fit(column, 2, config, detail::mix_seed(fit_seed, static_cast<std::uint64_t>(l))));
    }

    MvComparisonRow& row = rows[static_cast<std::size_t>(rep)];

    auto joint_full_err = [&](const std::vector<int>& perm) {
      double sum = 0.0;
      for (std::size_t k = 0; k < perm.size(); ++k)
        sum += (joint.params.beta[static_cast<std::size_t>(perm[k])] - draw.truth.beta[k])
                   .squaredNorm();
      return std::sqrt(sum);
    };
    auto [joint_perm, joint_err] = best_permutation(2, joint_full_err);
    (void)joint_err;
    row.joint_col2_error = column_error(joint.params.beta, draw.truth, joint_perm, 1, 1);
    std::vector<int> joint_labels = assign_labels(joint.eta);
    row.joint_label_error = label_error_percent(joint_labels, draw.true_w, joint_perm);

    const FitResult& sep2 = separate[1];
    auto sep2_err = [&](const std::vector<int>& perm) {
      return column_error(sep2.params.beta, draw.truth, perm, 1, 0);
    };
    auto [sep_perm, sep_err] = best_permutation(2, sep2_err);
    row.separate_col2_error = sep_err;
    std::vector<int> sep_labels = assign_labels(sep2.eta);
    row.separate2_label_error = label_error_percent(sep_labels, draw.true_w, sep_perm);
  });

  return rows;
}

}  // namespace mixlasso
