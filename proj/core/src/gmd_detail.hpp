#pragma once

#include "mixlasso/grouplasso.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace mixlasso::detail {

// The descent core is templated over the quadratic operator so the EM engine
// can plug in a lazy weighted-gram view (columns of sum_i w_i x_i x_i^T
// materialized on demand) while the public solver runs on explicit slices.
//
// Quad requirements:
//   Index  dim() const                       number of predictors p
//   int    slices() const                    number of mixtures K
//   double diag(int k, Index j) const        sigma_hat_k(j, j)
//   void   axpy_col(int k, Index j, double a, Eigen::Ref<Vector> out) const
//                                            out += a * sigma_hat_k.col(j)
//   Matrix apply(int k, const Matrix& b) const    sigma_hat_k * b

template <class Quad>
SolverReport gmd_solve(const Quad& quad, const std::vector<Matrix>& rho,
                       double lambda, const std::vector<Matrix>* warm_start,
                       double tol, int max_iter) {
  const int nk = quad.slices();
  const Index p = quad.dim();
  const Index q = rho.front().cols();

  SolverReport rep;
  if (warm_start) {
    rep.beta = *warm_start;
  } else {
    rep.beta.assign(nk, Matrix::Zero(p, q));
  }
  std::vector<Matrix>& beta = rep.beta;

  // Majorization constants; a zero diagonal across all slices means the
  // predictor is degenerate (PSD forces the whole column to zero), so the
  // group is pinned at zero.
  Vector h(p);
  std::vector<char> pinned(static_cast<std::size_t>(p), 0);
  for (Index j = 0; j < p; ++j) {
    double dmax = 0.0;
    for (int k = 0; k < nk; ++k) dmax = std::max(dmax, quad.diag(k, j));
    h[j] = 2.0 * dmax + 1e-10;
    if (dmax == 0.0) {
      pinned[static_cast<std::size_t>(j)] = 1;
      for (int k = 0; k < nk; ++k) beta[k].row(j).setZero();
    }
  }

  // u_k = sigma_hat_k * beta_k, maintained by rank-one column accumulation.
  std::vector<Matrix> u(static_cast<std::size_t>(nk));
  for (int k = 0; k < nk; ++k) {
    u[static_cast<std::size_t>(k)] =
        beta[k].isZero(0.0) ? Matrix::Zero(p, q) : quad.apply(k, beta[k]);
  }

  std::vector<double> zbuf(static_cast<std::size_t>(nk));

  // Group soft-threshold against the h_j-majorized quadratic.
  auto update_group = [&](Index j, Index l) {
    double znorm2 = 0.0;
    for (int k = 0; k < nk; ++k) {
      const double g = 2.0 * (u[k](j, l) - rho[k](j, l));
      zbuf[k] = h[j] * beta[k](j, l) - g;
      znorm2 += zbuf[k] * zbuf[k];
    }
    const double znorm = std::sqrt(znorm2);
    const double scale = (znorm > lambda) ? (1.0 - lambda / znorm) / h[j] : 0.0;
    for (int k = 0; k < nk; ++k) {
      const double updated = scale * zbuf[k];
      const double delta = updated - beta[k](j, l);
      if (delta != 0.0) {
        beta[k](j, l) = updated;
        quad.axpy_col(k, j, delta, u[k].col(l));
      }
    }
  };

  auto group_violation = [&](Index j, Index l) -> double {
    double gnorm2 = 0.0;
    double bnorm2 = 0.0;
    for (int k = 0; k < nk; ++k) {
      const double g = 2.0 * (u[k](j, l) - rho[k](j, l));
      zbuf[k] = g;
      gnorm2 += g * g;
      bnorm2 += beta[k](j, l) * beta[k](j, l);
    }
    if (bnorm2 == 0.0) return std::max(0.0, std::sqrt(gnorm2) - lambda);
    const double bnorm = std::sqrt(bnorm2);
    double v2 = 0.0;
    for (int k = 0; k < nk; ++k) {
      const double t = zbuf[k] + lambda * beta[k](j, l) / bnorm;
      v2 += t * t;
    }
    return std::sqrt(v2);
  };

  auto full_gap = [&]() {
    double gap = 0.0;
    for (Index l = 0; l < q; ++l)
      for (Index j = 0; j < p; ++j)
        if (!pinned[static_cast<std::size_t>(j)])
          gap = std::max(gap, group_violation(j, l));
    return gap;
  };

  auto group_nonzero = [&](Index j, Index l) {
    for (int k = 0; k < nk; ++k)
      if (beta[k](j, l) != 0.0) return true;
    return false;
  };

#ifndef NDEBUG
  auto objective = [&]() {
    double value = 0.0;
    for (int k = 0; k < nk; ++k)
      value += beta[k].cwiseProduct(u[k]).sum() - 2.0 * rho[k].cwiseProduct(beta[k]).sum();
    Matrix sq = Matrix::Zero(p, q);
    for (int k = 0; k < nk; ++k) sq.array() += beta[k].array().square();
    return value + lambda * sq.array().sqrt().sum();
  };
  double prev_objective = std::numeric_limits<double>::infinity();
#endif

  int sweeps = 0;
  double gap = std::numeric_limits<double>::infinity();
  bool converged = false;

  while (true) {
    for (Index l = 0; l < q; ++l)
      for (Index j = 0; j < p; ++j)
        if (!pinned[static_cast<std::size_t>(j)]) update_group(j, l);
    ++sweeps;
#ifndef NDEBUG
    {
      const double obj = objective();
      assert(obj <= prev_objective + 1e-12 * (1.0 + std::abs(prev_objective)));
      prev_objective = obj;
    }
#endif
    gap = full_gap();
    if (gap <= tol) {
      converged = true;
      break;
    }
    if (sweeps >= max_iter) break;

    // Iterate on the current nonzero groups until they stabilize; the next
    // full sweep then re-checks the zero groups for activation.
    std::vector<std::pair<Index, Index>> active;
    for (Index l = 0; l < q; ++l)
      for (Index j = 0; j < p; ++j)
        if (!pinned[static_cast<std::size_t>(j)] && group_nonzero(j, l))
          active.emplace_back(j, l);
    while (sweeps < max_iter && !active.empty()) {
      for (const auto& [j, l] : active) update_group(j, l);
      ++sweeps;
      double agap = 0.0;
      for (const auto& [j, l] : active) agap = std::max(agap, group_violation(j, l));
      if (agap <= tol) break;
    }
    if (sweeps >= max_iter) {
      gap = full_gap();
      break;
    }
  }

  rep.iterations = sweeps;
  rep.final_kkt_gap = gap;
  rep.converged = converged;
  return rep;
}

struct EagerQuad {
  const std::vector<Matrix>& sigma;

  Index dim() const { return sigma.front().rows(); }
  int slices() const { return static_cast<int>(sigma.size()); }
  double diag(int k, Index j) const { return sigma[static_cast<std::size_t>(k)](j, j); }
  void axpy_col(int k, Index j, double a, Eigen::Ref<Vector> out) const {
    out += a * sigma[static_cast<std::size_t>(k)].col(j);
  }
  Matrix apply(int k, const Matrix& b) const { return sigma[static_cast<std::size_t>(k)] * b; }
};

}  // namespace mixlasso::detail
