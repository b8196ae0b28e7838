#pragma once

#include "mixlasso/em.hpp"
#include "mixlasso/init.hpp"

#include <cstdint>
#include <vector>

namespace mixlasso {

enum class SimModel { M1, M2, M3, M4, MV, Custom };

struct CovarianceSpec {
  enum class Kind { Ar1, ErdosRenyi, Identity };
  Kind kind = Kind::Ar1;
  double rho = 0.3;    // ar1 correlation
  double prob = 0.1;   // erdos-renyi edge probability
  double umin = 0.5;   // |weight| range of present edges
  double umax = 1.0;
  double shift = 0.05; // eigenvalue lift before standardization

  static CovarianceSpec ar1(double rho = 0.3) { return {Kind::Ar1, rho, 0.1, 0.5, 1.0, 0.05}; }
  static CovarianceSpec erdos_renyi() { return {Kind::ErdosRenyi, 0.3, 0.1, 0.5, 1.0, 0.05}; }
  static CovarianceSpec identity() { return {Kind::Identity, 0.0, 0.1, 0.5, 1.0, 0.05}; }
};

/// Generative description of one benchmark scenario. The model id picks the
/// coefficient recipe; n/p/s/delta and the covariance can be overridden.
struct SimSpec {
  SimModel model = SimModel::M1;
  Index n = 400;
  Index p = 400;
  int s = 10;  // nonzero coefficient count (nonzero rows are s/q for q > 1)
  int k = 2;
  Index q = 1;
  CovarianceSpec covariance = CovarianceSpec::ar1();
  double delta = 2.0;  // between-mixture shift applied through sgn
  Vector omega;        // empty -> uniform
  double sigma2_true = 1.0;
  std::uint64_t seed = 0;

  static SimSpec model_defaults(SimModel model);
};

struct SimDraw {
  Dataset dataset;
  std::vector<int> true_w;  // 0-based mixture labels
  MixtureParams truth;
  std::vector<Index> true_support;
  double snr = 0.0;  // Delta; for K > 2 the smallest pairwise separation
};

/// Draw one replicate: X rows are iid N(0, Sigma), labels are categorical in
/// omega, y_i = beta_{W_i}^T x_i + noise. Deterministic per seed.
SimDraw generate(const SimSpec& spec);

struct MetricBundle {
  double beta_error = 0.0;   // sqrt(sum_k ||beta_hat_k - beta_k||_F^2), best permutation
  double omega_error = 0.0;  // sum_k |omega_hat_k - omega_k| * 100
  double label_error = 0.0;  // percent mislabeled
  double tpr = 0.0;          // percent of true support recovered
  double fpr = 0.0;          // percent of null predictors selected
  bool degenerate = false;
};

/// Score a fit against the truth after searching all K! mixture-index
/// permutations for the one minimizing beta_error; every metric is reported
/// under that single permutation. Throws on a mixture-count mismatch.
MetricBundle align_and_score(const FitResult& fit, const SimDraw& draw);

/// Permutation-aligned scoring from raw pieces (shared with the CLI).
/// fit_labels / true_w may be null, in which case label_error is 0.
MetricBundle score_params(const MixtureParams& fit_params, const std::vector<int>* fit_labels,
                          const MixtureParams& truth, const std::vector<Index>& true_support,
                          const std::vector<int>* true_w, Index p);

enum class Pipeline { Oracle, Pem, Psem, Initial };

struct PipelineConfig {
  Pipeline pipeline = Pipeline::Pem;
  double sigma2_fit = 1.0;    // fixed input variance for penalized fits
  double oracle_radius = 0.2; // truth perturbation for the oracle pipeline
  int screen_size = 50;
  int restarts = 10;
  int grid_points = 50;
  double grid_min_ratio = 0.01;
  int max_iter = 20;
  double conv_tol = 1e-3;
};

/// Run one fitting pipeline on a draw. Oracle refits on the true support with
/// lambda = 0 and adaptive variance from a perturbed-truth start; Pem screens,
/// initializes, and BIC-tunes the penalized fit; Psem refits Pem's selected
/// support unpenalized; Initial is the plug-in baseline (initializer labels
/// plus per-cluster lasso fits).
FitResult run_pipeline(const SimDraw& draw, const PipelineConfig& config, std::uint64_t seed);

struct ReplicateRow {
  int rep = 0;
  std::uint64_t seed = 0;
  MetricBundle metrics;
};

struct ReplicateTable {
  std::vector<ReplicateRow> rows;
  MetricBundle mean;
  MetricBundle se;  // standard errors of the means (degenerate holds the rate > 0)
};

/// reps independent draws through one pipeline, with per-replicate seeds
/// derived from base_seed. Per-replicate failures are recorded as degenerate
/// rows rather than thrown.
ReplicateTable run_replicates(const SimSpec& spec, const PipelineConfig& config, int reps,
                              std::uint64_t base_seed);

struct SigmaStudyCell {
  double delta = 0.0;
  double sigma2_input = 0.0;
  double mean_beta_error = 0.0;
  double se_beta_error = 0.0;
};

/// Sensitivity of the penalized fit to the assumed noise variance: data are
/// generated at sigma2 = 1 and fitted with each fixed input value. Draws are
/// shared across input values within a (delta, rep) cell so the comparison is
/// paired.
std::vector<SigmaStudyCell> sigma_misspec_study(const std::vector<double>& deltas,
                                                const std::vector<double>& sigma2_inputs,
                                                int reps, std::uint64_t base_seed,
                                                Index n = 400, Index p = 400);

struct MvComparisonRow {
  double joint_col2_error = 0.0;
  double separate_col2_error = 0.0;
  double joint_label_error = 0.0;
  double separate2_label_error = 0.0;
};

/// Joint multivariate fit versus per-response univariate fits on the
/// two-response design (strong first signal, delta on the second).
std::vector<MvComparisonRow> mv_joint_vs_separate(double delta, int reps,
                                                  std::uint64_t base_seed,
                                                  const PipelineConfig& config = {});

}  // namespace mixlasso
