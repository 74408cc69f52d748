#pragma once

#include <variant>

#include <Eigen/Dense>

namespace kbo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cholesky factor of A + shift * I. When the factorization breaks down, it is
// retried once with an extra diagonal `jitter`; if that fails too a
// SingularityError reports the smallest LDL^T pivot.
class SpdSolver {
 public:
  SpdSolver(const MatrixXd& A, double shift, double jitter = 0.0);

  MatrixXd solve(const MatrixXd& rhs) const { return llt_.solve(rhs); }
  VectorXd solve(const VectorXd& rhs) const { return llt_.solve(rhs); }

  double applied_jitter() const noexcept { return applied_jitter_; }
  Index size() const noexcept { return llt_.rows(); }

 private:
  Eigen::LLT<MatrixXd> llt_;
  double applied_jitter_ = 0.0;
};

// A = (1/n) diag(curvature) K + lambda I, the Jacobian of the inner residual
// map. Its transpose is M / n with M = K diag(curvature) + n lambda I, so one
// factorization serves both the Newton step and the implicit hypergradient.
// Constant curvature c >= 0 makes A symmetric positive definite and selects a
// Cholesky factorization; otherwise partial-pivot LU.
class CurvatureSystem {
 public:
  CurvatureSystem(const MatrixXd& K, const VectorXd& curvature, double lambda);

  bool matches(const VectorXd& curvature) const;
  VectorXd solve(const VectorXd& rhs) const;             // A^{-1} rhs
  VectorXd solve_transposed(const VectorXd& rhs) const;  // A^{-T} rhs

 private:
  VectorXd curvature_;
  std::variant<Eigen::LLT<MatrixXd>, Eigen::PartialPivLU<MatrixXd>> factor_;
};

}  // namespace kbo
