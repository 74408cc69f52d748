#include "kbo/iv_closed_form.hpp"

#include "kbo/errors.hpp"
#include "kbo/linalg.hpp"

namespace kbo {

IvClosedForm::IvClosedForm(const GramSet& gram, const MatrixXd& F, const VectorXd& outer_y,
                           double lambda, double ridge)
    : gram_(&gram), y_(outer_y), lambda_(lambda), ridge_(ridge) {
  const Index n = gram.n();
  if (F.rows() != n) throw InputError("IvClosedForm: F must have one row per inner point");
  if (outer_y.size() != gram.m()) throw InputError("IvClosedForm: one response per outer point");
  if (!(lambda > 0.0)) throw InputError("IvClosedForm: lambda must be positive");
  if (ridge < 0.0) throw InputError("IvClosedForm: ridge must be non-negative");
  const double nl = static_cast<double>(n) * lambda;
  SpdSolver solver(gram.K, nl, 1e-10 * static_cast<double>(n));
  C_ = solver.solve(F);
  B_.noalias() = gram.K_bar * C_;
}

double IvClosedForm::value(const VectorXd& omega) const {
  if (omega.size() != dim()) throw InputError("IvClosedForm::value: omega dimension mismatch");
  const double m = static_cast<double>(B_.rows());
  return 0.5 / m * (B_ * omega - y_).squaredNorm() + ridge_ * omega.squaredNorm();
}

VectorXd IvClosedForm::grad(const VectorXd& omega) const {
  if (omega.size() != dim()) throw InputError("IvClosedForm::grad: omega dimension mismatch");
  const double m = static_cast<double>(B_.rows());
  return B_.transpose() * (B_ * omega - y_) / m + 2.0 * ridge_ * omega;
}

InnerSolution IvClosedForm::inner(const VectorXd& omega) const {
  if (omega.size() != dim()) throw InputError("IvClosedForm::inner: omega dimension mismatch");
  InnerSolution sol;
  sol.gamma = C_ * omega;
  sol.pred_inner = gram_->K * sol.gamma;
  sol.pred_outer = B_ * omega;
  sol.h_norm_sq = std::max(0.0, sol.gamma.dot(sol.pred_inner));
  return sol;
}

VectorXd IvClosedForm::minimizer() const {
  const double m = static_cast<double>(B_.rows());
  MatrixXd H = B_.transpose() * B_ / m;
  H.diagonal().array() += 2.0 * ridge_;
  return Eigen::CompleteOrthogonalDecomposition<MatrixXd>(H).solve(B_.transpose() * y_ / m);
}

}  // namespace kbo
