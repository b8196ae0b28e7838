#include "mixlasso/grouplasso.hpp"

#include "gmd_detail.hpp"

#include <cmath>
#include <stdexcept>

namespace mixlasso {

namespace {

void check_problem(const MStepProblem& problem) {
  if (problem.sigma_hat.empty() || problem.rho_hat.size() != problem.sigma_hat.size())
    throw std::invalid_argument("MStepProblem: slice counts inconsistent");
  if (problem.lambda < 0.0) throw std::invalid_argument("MStepProblem: negative lambda");
  const Index p = problem.p();
  const Index q = problem.q();
  for (const Matrix& s : problem.sigma_hat)
    if (s.rows() != p || s.cols() != p)
      throw std::invalid_argument("MStepProblem: sigma_hat slices must be p x p");
  for (const Matrix& r : problem.rho_hat)
    if (r.rows() != p || r.cols() != q)
      throw std::invalid_argument("MStepProblem: rho_hat slices must be p x q");
}

}  // namespace

SolverReport solve_mstep(const MStepProblem& problem, const std::vector<Matrix>* warm_start,
                         double tol, int max_iter) {
  check_problem(problem);
  if (tol <= 0.0) throw std::invalid_argument("solve_mstep: tol must be positive");
  if (warm_start) {
    if (static_cast<int>(warm_start->size()) != problem.k())
      throw std::invalid_argument("solve_mstep: warm start slice count mismatch");
    for (const Matrix& b : *warm_start)
      if (b.rows() != problem.p() || b.cols() != problem.q())
        throw std::invalid_argument("solve_mstep: warm start dimension mismatch");
  }
  detail::EagerQuad quad{problem.sigma_hat};
  return detail::gmd_solve(quad, problem.rho_hat, problem.lambda, warm_start, tol, max_iter);
}

double kkt_gap(const MStepProblem& problem, const std::vector<Matrix>& beta) {
  check_problem(problem);
  const int nk = problem.k();
  const Index p = problem.p();
  const Index q = problem.q();

  std::vector<Matrix> grad(static_cast<std::size_t>(nk));
  for (int k = 0; k < nk; ++k)
    grad[k] = 2.0 * (problem.sigma_hat[k] * beta[k] - problem.rho_hat[k]);

  double gap = 0.0;
  for (Index l = 0; l < q; ++l) {
    for (Index j = 0; j < p; ++j) {
      double gnorm2 = 0.0;
      double bnorm2 = 0.0;
      for (int k = 0; k < nk; ++k) {
        gnorm2 += grad[k](j, l) * grad[k](j, l);
        bnorm2 += beta[k](j, l) * beta[k](j, l);
      }
      double viol;
      if (bnorm2 == 0.0) {
        viol = std::max(0.0, std::sqrt(gnorm2) - problem.lambda);
      } else {
        const double bnorm = std::sqrt(bnorm2);
        double v2 = 0.0;
        for (int k = 0; k < nk; ++k) {
          const double t = grad[k](j, l) + problem.lambda * beta[k](j, l) / bnorm;
          v2 += t * t;
        }
        viol = std::sqrt(v2);
      }
      gap = std::max(gap, viol);
    }
  }
  return gap;
}

double lambda_max(const std::vector<Matrix>& rho_hat) {
  if (rho_hat.empty()) return 0.0;
  Matrix sq = Matrix::Zero(rho_hat.front().rows(), rho_hat.front().cols());
  for (const Matrix& r : rho_hat) sq.array() += r.array().square();
  return sq.size() == 0 ? 0.0 : 2.0 * sq.array().sqrt().maxCoeff();
}

double mstep_objective(const MStepProblem& problem, const std::vector<Matrix>& beta) {
  double value = 0.0;
  for (int k = 0; k < problem.k(); ++k) {
    value += (beta[k].transpose() * (problem.sigma_hat[k] * beta[k])).trace();
    value -= 2.0 * problem.rho_hat[k].cwiseProduct(beta[k]).sum();
  }
  Matrix sq = Matrix::Zero(problem.p(), problem.q());
  for (const Matrix& b : beta) sq.array() += b.array().square();
  return value + problem.lambda * sq.array().sqrt().sum();
}

}  // namespace mixlasso
