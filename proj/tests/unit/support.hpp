#pragma once

// Hand-rolled instance generators for the property tests.

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "kbo/hypergrad.hpp"
#include "kbo/kernels.hpp"
#include "kbo/losses.hpp"
#include "kbo/rng.hpp"

namespace kbo::testing {

inline PointSet random_points(Rng& rng, Index count, Index p, double scale) {
  PointSet X(count, p);
  for (Index i = 0; i < count; ++i) {
    for (Index k = 0; k < p; ++k) X(i, k) = scale * rng.normal();
  }
  return X;
}

inline VectorXd random_vector(Rng& rng, Index d, double lo, double hi) {
  VectorXd v(d);
  for (Index k = 0; k < d; ++k) v(k) = rng.uniform(lo, hi);
  return v;
}

inline Index random_size(Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

// Inputs are drawn at a scale comparable to the bandwidth so that the Gram
// matrices are far from the identity.
inline KernelSpec test_kernel(double sigma = 0.5, Index p = 3) {
  KernelSpec spec;
  spec.bandwidth = sigma;
  spec.input_dim = p;
  return spec;
}

inline EmpiricalProblem random_iv_problem(Rng& rng, Index n, Index m, Index d = 4, double lambda = 0.05) {
  const KernelSpec spec = test_kernel();
  const PointSet X = random_points(rng, n, 3, 0.5);
  const PointSet Xo = random_points(rng, m, 3, 0.5);
  EmpiricalProblem prob;
  prob.gram = GramSet::build(spec, X, Xo);
  const SineFeatureMap phi(d);
  prob.inner_loss = std::make_shared<IvInnerLoss>(phi);
  prob.outer_loss = std::make_shared<IvOuterLoss>(d);
  for (Index i = 0; i < n; ++i) prob.inner_targets.emplace_back(Treatment{2.0 * rng.normal()});
  for (Index j = 0; j < m; ++j) prob.outer_targets.emplace_back(Response{rng.normal()});
  prob.lambda = lambda;
  return prob;
}

inline EmpiricalProblem random_shift_problem(Rng& rng, Index n, Index m, double lambda = 0.05) {
  const KernelSpec spec = test_kernel();
  const PointSet X = random_points(rng, n, 3, 0.5);
  PointSet Xo = random_points(rng, m, 3, 0.5);
  Xo.array() += 0.3;
  EmpiricalProblem prob;
  prob.gram = GramSet::build(spec, X, Xo);
  prob.inner_loss = std::make_shared<ShiftInnerLoss>();
  prob.outer_loss = std::make_shared<ShiftOuterLoss>();
  for (Index i = 0; i < n; ++i) prob.inner_targets.emplace_back(Response{std::sin(2.0 * X.row(i).sum())});
  for (Index j = 0; j < m; ++j) prob.outer_targets.emplace_back(Response{std::sin(2.0 * Xo.row(j).sum())});
  prob.lambda = lambda;
  return prob;
}

// l(omega, v, t) = log cosh(v - omega^T phi(t)): convex in v with
// non-constant curvature 1 - tanh^2, so the estimators see a general
// diagonal D_vv.
class LogCoshInnerLoss final : public LossBundle {
 public:
  explicit LogCoshInnerLoss(Index d) : phi_(d) {}
  Index param_dim() const noexcept override { return phi_.dim(); }
  bool convex_in_v() const noexcept override { return true; }
  bool quadratic_in_v() const noexcept override { return false; }
  std::string name() const override { return "logcosh_inner"; }
  DerivativeRecord eval(const VectorXd& omega, double v, const Target& y) const override {
    const VectorXd f = phi_(target_value(y));
    const double r = v - omega.dot(f);
    const double th = std::tanh(r);
    DerivativeRecord rec;
    rec.value = std::abs(r) + std::log1p(std::exp(-2.0 * std::abs(r))) - std::log(2.0);
    rec.d_v = th;
    rec.d_vv = 1.0 - th * th;
    rec.d_omega = -th * f;
    rec.d_omega_v = -(1.0 - th * th) * f;
    return rec;
  }

 private:
  SineFeatureMap phi_;
};

inline EmpiricalProblem random_logcosh_problem(Rng& rng, Index n, Index m, Index d = 3, double lambda = 0.05) {
  EmpiricalProblem prob = random_iv_problem(rng, n, m, d, lambda);
  prob.inner_loss = std::make_shared<LogCoshInnerLoss>(d);
  return prob;
}

}  // namespace kbo::testing
