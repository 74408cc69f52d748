#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kbo/inner_solver.hpp"
#include "kbo/kernels.hpp"
#include "kbo/linalg.hpp"
#include "kbo/losses.hpp"

namespace kbo {

// One empirical bilevel instance: Gram matrices, both losses, their targets
// and the inner regularization.
struct EmpiricalProblem {
  GramSet gram;
  std::shared_ptr<const LossBundle> inner_loss;
  std::shared_ptr<const LossBundle> outer_loss;
  std::vector<Target> inner_targets;
  std::vector<Target> outer_targets;
  double lambda = 0.01;

  Index n() const noexcept { return gram.n(); }
  Index m() const noexcept { return gram.m(); }
  Index d() const noexcept { return inner_loss ? inner_loss->param_dim() : 0; }

  void validate() const;
};

// Loss derivatives at the current inner solution plus the derived matrices
// shared by both gradient estimators:
//   M   = K diag(D_vv_in) + n lambda I
//   u   = K_bar^T D_v_out                (xi evaluated at the inner points)
//   xi_norm_sq = D_v_out^T K_tilde D_v_out
//   p   = u^T diag(D_vv_in) u + n lambda ||xi||^2,  v = ||xi||^2
struct EstimatorWorkspace {
  VectorXd D_v_out;      // m
  MatrixXd D_omega_out;  // d x m
  VectorXd D_vv_in;      // n
  MatrixXd D_omega_v_in; // d x n
  MatrixXd M;            // n x n
  VectorXd u;            // n
  double xi_norm_sq = 0.0;
  double p_scalar = 0.0;
  double v_scalar = 0.0;
  double lambda = 0.0;

  Index n() const noexcept { return D_vv_in.size(); }
  Index m() const noexcept { return D_v_out.size(); }
};

EstimatorWorkspace assemble_workspace(const EmpiricalProblem& problem, const VectorXd& omega,
                                      const InnerSolution& inner);

// (1/m) sum_j l_out(omega, (K_bar gamma)_j, y_j).
double value_hat(const VectorXd& omega, const InnerSolution& inner, const LossBundle& outer_loss,
                 std::span<const Target> outer_targets);

// (1/m) D_omega_out 1 - (1/m) D_omega_v_in M^{-1} u.
VectorXd grad_implicit(const EstimatorWorkspace& ws);
// Same, reusing the inner solver's factorization of M^T / n.
VectorXd grad_implicit(const EstimatorWorkspace& ws, const CurvatureSystem& curvature);
VectorXd grad_implicit(const EmpiricalProblem& problem, const VectorXd& omega,
                       const InnerSolution& inner);

struct AdjointSolution {
  VectorXd alpha;
  double beta = 0.0;
  // ||H c - rhs|| / (||H|| ||c|| + ||rhs||) for the (n+1) x (n+1) system.
  double residual = 0.0;
  bool least_squares = false;
};

// Coefficients of a_hat = sum_i alpha_i K(x_i, .) + beta xi from the block system
//   [ M K      M u ] [alpha]      n  [ u ]
//   [ (M u)^T  p   ] [beta ] = - --- [ v ].
//                                 m
AdjointSolution adjoint_solve(const EstimatorWorkspace& ws, const GramSet& gram);

// a_hat(x_i) = ([K u] [alpha; beta])_i.
VectorXd adjoint_evals(const EstimatorWorkspace& ws, const GramSet& gram,
                       const AdjointSolution& adjoint);

// (1/m) sum_j d_omega l_out + (1/n) sum_i d_omega_v l_in a_hat(x_i).
VectorXd grad_plugin(const EstimatorWorkspace& ws, const VectorXd& adjoint_at_inner);

// Empirical adjoint objective evaluated at a_{alpha,beta}.
double adjoint_objective(const EstimatorWorkspace& ws, const GramSet& gram, const VectorXd& alpha,
                         double beta);

struct HypergradResult {
  double value = 0.0;
  VectorXd grad;
  VectorXd alpha;
  double beta = 0.0;
  double adjoint_residual = 0.0;
  // Infinity-norm gap between the implicit and plug-in gradients; NaN when
  // only one path was evaluated.
  double estimator_gap = 0.0;
};

enum class GradientPath { Implicit, Plugin, Both };

// Solves the inner problem at each queried omega (warm-started from the
// previous solution) and evaluates the value function and its gradient.
// Queries at the last omega reuse the cached inner solution. Not thread-safe;
// use one evaluator per thread.
class HypergradEvaluator {
 public:
  explicit HypergradEvaluator(EmpiricalProblem problem, NewtonOptions newton = {});

  const EmpiricalProblem& problem() const noexcept { return problem_; }

  const InnerSolution& inner(const VectorXd& omega);
  double value(const VectorXd& omega);
  VectorXd grad(const VectorXd& omega);
  HypergradResult evaluate(const VectorXd& omega, GradientPath path = GradientPath::Implicit);

 private:
  EmpiricalProblem problem_;
  NewtonOptions newton_;
  std::optional<VectorXd> last_omega_;
  InnerSolution last_inner_;
  std::optional<CurvatureSystem> curvature_;
};

}  // namespace kbo
