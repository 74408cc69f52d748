#include "kbo/hypergrad.hpp"

#include <cmath>
#include <limits>

#include "kbo/errors.hpp"

namespace kbo {

void EmpiricalProblem::validate() const {
  if (!inner_loss || !outer_loss) throw InputError("EmpiricalProblem: missing loss bundle");
  if (inner_loss->param_dim() != outer_loss->param_dim()) {
    throw InputError("EmpiricalProblem: inner and outer losses disagree on the parameter dimension");
  }
  if (n() == 0 || m() == 0) throw InputError("EmpiricalProblem: empty sample");
  if (gram.K.cols() != n() || gram.K_bar.cols() != n()) {
    throw InputError("EmpiricalProblem: inconsistent Gram matrix shapes");
  }
  if (gram.K_tilde.rows() != m() || gram.K_tilde.cols() != m()) {
    throw InputError("EmpiricalProblem: K_tilde must be m x m");
  }
  if (static_cast<Index>(inner_targets.size()) != n() ||
      static_cast<Index>(outer_targets.size()) != m()) {
    throw InputError("EmpiricalProblem: target counts do not match the sample sizes");
  }
  if (!(lambda > 0.0)) throw InputError("EmpiricalProblem: lambda must be positive");
}

EstimatorWorkspace assemble_workspace(const EmpiricalProblem& problem, const VectorXd& omega,
                                      const InnerSolution& inner) {
  const Index n = problem.n();
  const Index m = problem.m();
  const Index d = problem.d();
  if (omega.size() != d) throw InputError("assemble_workspace: omega dimension mismatch");
  if (inner.pred_inner.size() != n || inner.pred_outer.size() != m) {
    throw InputError("assemble_workspace: inner solution does not match the problem");
  }
  EstimatorWorkspace ws;
  ws.lambda = problem.lambda;
  ws.D_v_out.resize(m);
  ws.D_omega_out.resize(d, m);
  for (Index j = 0; j < m; ++j) {
    const DerivativeRecord rec =
        problem.outer_loss->eval(omega, inner.pred_outer(j), problem.outer_targets[j]);
    ws.D_v_out(j) = rec.d_v;
    ws.D_omega_out.col(j) = rec.d_omega;
  }
  ws.D_vv_in.resize(n);
  ws.D_omega_v_in.resize(d, n);
  for (Index i = 0; i < n; ++i) {
    const DerivativeRecord rec =
        problem.inner_loss->eval(omega, inner.pred_inner(i), problem.inner_targets[i]);
    ws.D_vv_in(i) = rec.d_vv;
    ws.D_omega_v_in.col(i) = rec.d_omega_v;
  }
  if (!ws.D_v_out.allFinite() || !ws.D_vv_in.allFinite()) {
    throw NumericError("assemble_workspace: non-finite loss derivatives");
  }

  const double nl = static_cast<double>(n) * problem.lambda;
  ws.M = problem.gram.K * ws.D_vv_in.asDiagonal();
  ws.M.diagonal().array() += nl;
  ws.u.noalias() = problem.gram.K_bar.transpose() * ws.D_v_out;
  ws.xi_norm_sq = std::max(0.0, ws.D_v_out.dot(problem.gram.K_tilde * ws.D_v_out));
  ws.v_scalar = ws.xi_norm_sq;
  ws.p_scalar = ws.u.dot(ws.D_vv_in.asDiagonal() * ws.u) + nl * ws.xi_norm_sq;
  return ws;
}

double value_hat(const VectorXd& omega, const InnerSolution& inner, const LossBundle& outer_loss,
                 std::span<const Target> outer_targets) {
  const Index m = inner.pred_outer.size();
  if (m == 0 || static_cast<Index>(outer_targets.size()) != m) {
    throw InputError("value_hat: outer predictions and targets disagree");
  }
  if (!inner.pred_outer.allFinite()) throw NumericError("value_hat: non-finite predictions");
  double sum = 0.0;
  for (Index j = 0; j < m; ++j) sum += outer_loss.value(omega, inner.pred_outer(j), outer_targets[j]);
  return sum / static_cast<double>(m);
}

namespace {

VectorXd implicit_from_solution(const EstimatorWorkspace& ws, const VectorXd& Minv_u) {
  const double inv_m = 1.0 / static_cast<double>(ws.m());
  return inv_m * (ws.D_omega_out.rowwise().sum() - ws.D_omega_v_in * Minv_u);
}

}  // namespace

VectorXd grad_implicit(const EstimatorWorkspace& ws) {
  Eigen::PartialPivLU<MatrixXd> lu(ws.M);
  const double pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(pivot > 0.0) || !std::isfinite(pivot)) throw SingularityError("grad_implicit: M is singular", pivot);
  return implicit_from_solution(ws, lu.solve(ws.u));
}

VectorXd grad_implicit(const EstimatorWorkspace& ws, const CurvatureSystem& curvature) {
  // M = n A^T, so M^{-1} u = A^{-T} u / n.
  const VectorXd Minv_u = curvature.solve_transposed(ws.u) / static_cast<double>(ws.n());
  return implicit_from_solution(ws, Minv_u);
}

VectorXd grad_implicit(const EmpiricalProblem& problem, const VectorXd& omega,
                       const InnerSolution& inner) {
  return grad_implicit(assemble_workspace(problem, omega, inner));
}

AdjointSolution adjoint_solve(const EstimatorWorkspace& ws, const GramSet& gram) {
  const Index n = ws.n();
  const Index m = ws.m();
  if (gram.n() != n) throw InputError("adjoint_solve: Gram matrix does not match the workspace");

  // The Hessian of the coefficient-space adjoint objective, scaled by n. The
  // lower-left block is (M u)^T, which keeps the system symmetric for any
  // diagonal curvature.
  MatrixXd H(n + 1, n + 1);
  H.topLeftCorner(n, n).noalias() = ws.M * gram.K;
  const VectorXd Mu = ws.M * ws.u;
  H.topRightCorner(n, 1) = Mu;
  H.bottomLeftCorner(1, n) = Mu.transpose();
  H(n, n) = ws.p_scalar;
  // Symmetrize away rounding in M K.
  H = 0.5 * (H + H.transpose()).eval();

  VectorXd rhs(n + 1);
  rhs.head(n) = ws.u;
  rhs(n) = ws.v_scalar;
  rhs *= -static_cast<double>(n) / static_cast<double>(m);

  auto relative_residual = [&](const VectorXd& c) {
    const double denom = H.norm() * c.norm() + rhs.norm();
    return denom > 0.0 ? (H * c - rhs).norm() / denom : 0.0;
  };

  AdjointSolution out;
  VectorXd c = Eigen::LDLT<MatrixXd>(H).solve(rhs);
  double res = c.allFinite() ? relative_residual(c) : std::numeric_limits<double>::infinity();
  if (!(res <= 1e-10)) {
    c = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(H).solve(rhs);
    res = relative_residual(c);
    out.least_squares = true;
  }
  out.alpha = c.head(n);
  out.beta = c(n);
  out.residual = res;
  return out;
}

VectorXd adjoint_evals(const EstimatorWorkspace& ws, const GramSet& gram,
                       const AdjointSolution& adjoint) {
  return gram.K * adjoint.alpha + adjoint.beta * ws.u;
}

VectorXd grad_plugin(const EstimatorWorkspace& ws, const VectorXd& adjoint_at_inner) {
  if (adjoint_at_inner.size() != ws.n()) throw InputError("grad_plugin: adjoint evaluation size mismatch");
  const double inv_m = 1.0 / static_cast<double>(ws.m());
  const double inv_n = 1.0 / static_cast<double>(ws.n());
  return inv_m * ws.D_omega_out.rowwise().sum() + inv_n * (ws.D_omega_v_in * adjoint_at_inner);
}

double adjoint_objective(const EstimatorWorkspace& ws, const GramSet& gram, const VectorXd& alpha,
                         double beta) {
  const double n = static_cast<double>(ws.n());
  const double m = static_cast<double>(ws.m());
  const VectorXd a_at_inner = gram.K * alpha + beta * ws.u;
  // <a, xi>_H and ||a||_H^2 via the Gram matrix of (K(x_1, .), ..., K(x_n, .), xi).
  const double a_dot_xi = ws.u.dot(alpha) + beta * ws.xi_norm_sq;
  const double a_norm_sq =
      alpha.dot(gram.K * alpha) + 2.0 * beta * ws.u.dot(alpha) + beta * beta * ws.xi_norm_sq;
  return 0.5 / n * a_at_inner.dot(ws.D_vv_in.asDiagonal() * a_at_inner) + a_dot_xi / m +
         0.5 * ws.lambda * a_norm_sq;
}

HypergradEvaluator::HypergradEvaluator(EmpiricalProblem problem, NewtonOptions newton)
    : problem_(std::move(problem)), newton_(newton) {
  problem_.validate();
}

const InnerSolution& HypergradEvaluator::inner(const VectorXd& omega) {
  if (last_omega_ && last_omega_->size() == omega.size() && (*last_omega_ == omega)) return last_inner_;
  const VectorXd* warm = last_omega_ ? &last_inner_.gamma : nullptr;
  InnerSolution sol = solve_inner_newton(problem_.gram, *problem_.inner_loss, problem_.inner_targets,
                                         problem_.lambda, omega, newton_, warm, &curvature_);
  last_inner_ = std::move(sol);
  last_omega_ = omega;
  return last_inner_;
}

double HypergradEvaluator::value(const VectorXd& omega) {
  return value_hat(omega, inner(omega), *problem_.outer_loss, problem_.outer_targets);
}

VectorXd HypergradEvaluator::grad(const VectorXd& omega) { return evaluate(omega).grad; }

HypergradResult HypergradEvaluator::evaluate(const VectorXd& omega, GradientPath path) {
  const InnerSolution& sol = inner(omega);
  const EstimatorWorkspace ws = assemble_workspace(problem_, omega, sol);

  HypergradResult out;
  out.value = value_hat(omega, sol, *problem_.outer_loss, problem_.outer_targets);
  out.estimator_gap = std::numeric_limits<double>::quiet_NaN();

  VectorXd implicit;
  if (path != GradientPath::Plugin) {
    if (!curvature_ || !curvature_->matches(ws.D_vv_in)) curvature_.emplace(problem_.gram.K, ws.D_vv_in, problem_.lambda);
    implicit = grad_implicit(ws, *curvature_);
    out.grad = implicit;
  }
  if (path != GradientPath::Implicit) {
    const AdjointSolution adj = adjoint_solve(ws, problem_.gram);
    const VectorXd plugin = grad_plugin(ws, adjoint_evals(ws, problem_.gram, adj));
    out.alpha = adj.alpha;
    out.beta = adj.beta;
    out.adjoint_residual = adj.residual;
    if (path == GradientPath::Plugin) {
      out.grad = plugin;
    } else {
      out.estimator_gap = (implicit - plugin).cwiseAbs().maxCoeff();
    }
  }
  return out;
}

}  // namespace kbo
