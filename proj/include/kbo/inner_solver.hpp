#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

#include "kbo/kernels.hpp"
#include "kbo/linalg.hpp"
#include "kbo/losses.hpp"

namespace kbo {

// gamma minimizes (1/n) sum_i l_in(omega, (K gamma)_i, y_i) + lambda/2 gamma^T K gamma;
// the inner function is h = sum_i gamma_i K(x_i, .).
struct InnerSolution {
  VectorXd gamma;
  VectorXd pred_inner;  // K gamma
  VectorXd pred_outer;  // K_bar gamma
  double h_norm_sq = 0.0;
  // ||r(gamma)|| with r(gamma) = (1/n) d_v(K gamma) + lambda gamma.
  double residual_norm = 0.0;
  int iterations = 0;
};

struct NewtonOptions {
  double tol = 0.0;  // <= 0 selects 1e-10 * (1 + ||omega||)
  int max_iter = 100;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  int max_halvings = 30;
};

double default_inner_tol(const VectorXd& omega);

// r(gamma) = (1/n) d_v + lambda gamma, d_v evaluated at the cached predictions.
VectorXd inner_residual(const LossBundle& loss, std::span<const Target> targets, double lambda,
                        const VectorXd& omega, const VectorXd& gamma, const VectorXd& pred_inner);

double inner_objective(const LossBundle& loss, std::span<const Target> targets, double lambda,
                       const VectorXd& omega, const VectorXd& gamma, const VectorXd& pred_inner);

// gamma = (K + n lambda I)^{-1} F omega for the IV inner loss, F holding rows phi(t_i)^T.
InnerSolution solve_inner_closed_form(const GramSet& gram, const MatrixXd& F, double lambda,
                                      const VectorXd& omega);

// Damped Newton on r(gamma) = 0 with Armijo backtracking on the inner
// objective. Stops once ||r|| <= tol and sqrt(r^T K r) <= tol. `factor_cache` (optional) is reused when the curvature vector
// is unchanged and replaced otherwise.
InnerSolution solve_inner_newton(const GramSet& gram, const LossBundle& loss,
                                 std::span<const Target> targets, double lambda,
                                 const VectorXd& omega, const NewtonOptions& options = {},
                                 const VectorXd* warm_start = nullptr,
                                 std::optional<CurvatureSystem>* factor_cache = nullptr);

// Upper bound on ||h - h_hat||_H from strong convexity: ||grad_h L_in(h)||_H / lambda,
// where grad_h L_in(h) = sum_i r_i K(x_i, .).
double optimality_gap_bound(const GramSet& gram, const VectorXd& residual, double lambda);

// B = max_i |d_v l_in(omega, 0, y_i)| over the inner sample.
double inner_gradient_bound(const LossBundle& loss, std::span<const Target> targets,
                            const VectorXd& omega);

struct InnerNormBounds {
  double rkhs_norm;  // B sqrt(kappa) / lambda
  double sup_value;  // B kappa / lambda
};
InnerNormBounds inner_norm_bounds(double B, double kappa, double lambda);

}  // namespace kbo
