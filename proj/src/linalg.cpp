#include "kbo/linalg.hpp"

#include "kbo/errors.hpp"

namespace kbo {

namespace {

double smallest_ldlt_pivot(const MatrixXd& A) {
  Eigen::LDLT<MatrixXd> ldlt(A);
  return ldlt.vectorD().minCoeff();
}

}  // namespace

SpdSolver::SpdSolver(const MatrixXd& A, double shift, double jitter) {
  if (A.rows() != A.cols()) throw InputError("SpdSolver: matrix must be square");
  MatrixXd shifted = A;
  shifted.diagonal().array() += shift;
  llt_.compute(shifted);
  if (llt_.info() == Eigen::Success) return;
  if (jitter > 0.0) {
    shifted.diagonal().array() += jitter;
    llt_.compute(shifted);
    if (llt_.info() == Eigen::Success) {
      applied_jitter_ = jitter;
      return;
    }
  }
  throw SingularityError("Cholesky factorization failed: matrix is not numerically SPD",
                         smallest_ldlt_pivot(shifted));
}

CurvatureSystem::CurvatureSystem(const MatrixXd& K, const VectorXd& curvature, double lambda)
    : curvature_(curvature) {
  const Index n = K.rows();
  if (K.cols() != n || curvature.size() != n) throw InputError("CurvatureSystem: size mismatch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double c0 = curvature(0);
  const bool constant = (curvature.array() == c0).all() && c0 >= 0.0;
  MatrixXd A = (inv_n * curvature).asDiagonal() * K;
  A.diagonal().array() += lambda;
  if (constant) {
    Eigen::LLT<MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      factor_ = std::move(llt);
      return;
    }
  }
  Eigen::PartialPivLU<MatrixXd> lu(A);
  const double pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(pivot > 0.0) || !std::isfinite(pivot)) {
    throw SingularityError("curvature system is singular", pivot);
  }
  factor_ = std::move(lu);
}

bool CurvatureSystem::matches(const VectorXd& curvature) const {
  return curvature.size() == curvature_.size() && (curvature.array() == curvature_.array()).all();
}

VectorXd CurvatureSystem::solve(const VectorXd& rhs) const {
  return std::visit([&](const auto& f) -> VectorXd { return f.solve(rhs); }, factor_);
}

VectorXd CurvatureSystem::solve_transposed(const VectorXd& rhs) const {
  return std::visit([&](const auto& f) -> VectorXd { return f.transpose().solve(rhs); }, factor_);
}

}  // namespace kbo
