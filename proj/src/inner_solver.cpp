#include "kbo/inner_solver.hpp"

#include <cmath>
#include <limits>

#include "kbo/errors.hpp"

namespace kbo {

namespace {

void check_inner_shapes(const GramSet& gram, std::span<const Target> targets, double lambda) {
  if (gram.n() == 0) throw InputError("inner solver: empty inner sample");
  if (static_cast<Index>(targets.size()) != gram.n()) {
    throw InputError("inner solver: target count does not match the Gram matrix");
  }
  if (!(lambda > 0.0)) throw InputError("inner solver: lambda must be positive");
}

void fill_derived(const GramSet& gram, InnerSolution& sol) {
  sol.pred_outer = gram.K_bar.size() > 0 ? VectorXd(gram.K_bar * sol.gamma) : VectorXd();
  sol.h_norm_sq = std::max(0.0, sol.gamma.dot(sol.pred_inner));
}

}  // namespace

double default_inner_tol(const VectorXd& omega) { return 1e-10 * (1.0 + omega.norm()); }

VectorXd inner_residual(const LossBundle& loss, std::span<const Target> targets, double lambda,
                        const VectorXd& omega, const VectorXd& gamma, const VectorXd& pred_inner) {
  const Index n = gamma.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  VectorXd r(n);
  for (Index i = 0; i < n; ++i) {
    r(i) = inv_n * loss.eval(omega, pred_inner(i), targets[i]).d_v + lambda * gamma(i);
  }
  return r;
}

double inner_objective(const LossBundle& loss, std::span<const Target> targets, double lambda,
                       const VectorXd& omega, const VectorXd& gamma, const VectorXd& pred_inner) {
  const Index n = gamma.size();
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) sum += loss.value(omega, pred_inner(i), targets[i]);
  return sum / static_cast<double>(n) + 0.5 * lambda * gamma.dot(pred_inner);
}

InnerSolution solve_inner_closed_form(const GramSet& gram, const MatrixXd& F, double lambda,
                                      const VectorXd& omega) {
  const Index n = gram.n();
  if (n == 0) throw InputError("solve_inner_closed_form: empty inner sample");
  if (F.rows() != n) throw InputError("solve_inner_closed_form: F must have one row per inner point");
  if (F.cols() != omega.size()) throw InputError("solve_inner_closed_form: omega dimension mismatch");
  if (!(lambda > 0.0)) throw InputError("solve_inner_closed_form: lambda must be positive");
  if (!omega.allFinite()) throw NumericError("solve_inner_closed_form: non-finite omega");

  const double nl = static_cast<double>(n) * lambda;
  const SpdSolver solver(gram.K, nl, 1e-10 * static_cast<double>(n));
  const VectorXd target = F * omega;

  InnerSolution sol;
  sol.gamma = solver.solve(target);
  sol.pred_inner = gram.K * sol.gamma;
  fill_derived(gram, sol);
  const VectorXd r = (sol.pred_inner - target) / static_cast<double>(n) + lambda * sol.gamma;
  sol.residual_norm = r.norm();
  sol.iterations = 0;
  return sol;
}

InnerSolution solve_inner_newton(const GramSet& gram, const LossBundle& loss,
                                 std::span<const Target> targets, double lambda,
                                 const VectorXd& omega, const NewtonOptions& options,
                                 const VectorXd* warm_start,
                                 std::optional<CurvatureSystem>* factor_cache) {
  check_inner_shapes(gram, targets, lambda);
  if (!loss.convex_in_v()) {
    throw ContractViolation("solve_inner_newton: " + loss.name() + " is not convex in v");
  }
  if (omega.size() != loss.param_dim()) throw InputError("solve_inner_newton: omega dimension mismatch");
  if (!omega.allFinite()) throw NumericError("solve_inner_newton: non-finite omega");

  const Index n = gram.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double tol = options.tol > 0.0 ? options.tol : default_inner_tol(omega);

  std::optional<CurvatureSystem> local_cache;
  std::optional<CurvatureSystem>& cache = factor_cache ? *factor_cache : local_cache;

  InnerSolution sol;
  if (warm_start && warm_start->size() == n && warm_start->allFinite()) {
    sol.gamma = *warm_start;
  } else {
    sol.gamma = VectorXd::Zero(n);
  }
  sol.pred_inner = gram.K * sol.gamma;

  VectorXd d_v(n), d_vv(n);
  auto evaluate = [&](const VectorXd& pred) {
    for (Index i = 0; i < n; ++i) {
      const DerivativeRecord rec = loss.eval(omega, pred(i), targets[i]);
      d_v(i) = rec.d_v;
      d_vv(i) = rec.d_vv;
    }
  };

  double objective = inner_objective(loss, targets, lambda, omega, sol.gamma, sol.pred_inner);
  for (int it = 0;; ++it) {
    evaluate(sol.pred_inner);
    const VectorXd r = inv_n * d_v + lambda * sol.gamma;
    sol.residual_norm = r.norm();
    if (!std::isfinite(sol.residual_norm)) {
      throw NumericError("solve_inner_newton: non-finite residual");
    }
    // Both the Euclidean residual and the RKHS norm of the inner gradient,
    // sqrt(r^T K r), must be below tol.
    if (sol.residual_norm <= tol && r.dot(gram.K * r) <= tol * tol) break;
    if (it >= options.max_iter) {
      throw ConvergenceError("solve_inner_newton: iteration limit reached", sol.residual_norm, it);
    }
    if ((d_vv.array() < 0.0).any()) {
      throw ContractViolation("solve_inner_newton: negative curvature d_vv encountered");
    }
    if (!cache || !cache->matches(d_vv)) cache.emplace(gram.K, d_vv, lambda);

    const VectorXd delta = -cache->solve(r);
    const VectorXd K_delta = gram.K * delta;
    // grad_gamma J = K r, so the directional derivative is (K r)^T delta.
    const double slope = K_delta.dot(r);
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(objective));

    double step = 1.0;
    bool accepted = false;
    VectorXd gamma_trial, pred_trial;
    double objective_trial = objective;
    for (int h = 0; h <= options.max_halvings; ++h) {
      gamma_trial = sol.gamma + step * delta;
      pred_trial = sol.pred_inner + step * K_delta;
      objective_trial = inner_objective(loss, targets, lambda, omega, gamma_trial, pred_trial);
      if (objective_trial <= objective + options.armijo_c * step * slope + slack) {
        accepted = true;
        break;
      }
      step *= options.shrink;
    }
    if (!accepted) {
      throw ConvergenceError("solve_inner_newton: line search failed", sol.residual_norm, it);
    }
    sol.gamma = std::move(gamma_trial);
    sol.pred_inner.noalias() = gram.K * sol.gamma;
    objective = objective_trial;
    sol.iterations = it + 1;
  }
  fill_derived(gram, sol);
  return sol;
}

double optimality_gap_bound(const GramSet& gram, const VectorXd& residual, double lambda) {
  const double sq = residual.dot(gram.K * residual);
  return std::sqrt(std::max(0.0, sq)) / lambda;
}

double inner_gradient_bound(const LossBundle& loss, std::span<const Target> targets,
                            const VectorXd& omega) {
  double B = 0.0;
  for (const Target& y : targets) B = std::max(B, std::abs(loss.eval(omega, 0.0, y).d_v));
  return B;
}

InnerNormBounds inner_norm_bounds(double B, double kappa, double lambda) {
  return {B * std::sqrt(kappa) / lambda, B * kappa / lambda};
}

}  // namespace kbo
