#pragma once

#include <Eigen/Dense>

#include "kbo/inner_solver.hpp"
#include "kbo/kernels.hpp"

namespace kbo {

// The IV value function is an exact quadratic in omega:
//   C = (K + n lambda I)^{-1} F,  B = K_bar C,
//   F_hat(omega) = 1/(2m) ||B omega - y||^2 + ridge ||omega||^2.
// Precomputing B once turns every value and gradient query into O(m d).
// `gram` must outlive the object.
class IvClosedForm {
 public:
  IvClosedForm(const GramSet& gram, const MatrixXd& F, const VectorXd& outer_y, double lambda,
               double ridge = 0.0);

  Index dim() const noexcept { return B_.cols(); }
  const MatrixXd& coefficients() const noexcept { return C_; }  // n x d
  const MatrixXd& outer_design() const noexcept { return B_; }  // m x d

  double value(const VectorXd& omega) const;
  VectorXd grad(const VectorXd& omega) const;
  // The inner solution at omega, gamma = C omega.
  InnerSolution inner(const VectorXd& omega) const;
  // Unique stationary point when B has full column rank or ridge > 0.
  VectorXd minimizer() const;

 private:
  const GramSet* gram_;
  MatrixXd C_;
  MatrixXd B_;
  VectorXd y_;
  double lambda_;
  double ridge_;
};

}  // namespace kbo
