#include <doctest.h>

#include <cmath>

#include "kbo/errors.hpp"
#include "kbo/hypergrad.hpp"
#include "kbo/iv_closed_form.hpp"
#include "support.hpp"

using namespace kbo;

namespace {

InnerSolution solve(const EmpiricalProblem& p, const VectorXd& w) {
  return solve_inner_newton(p.gram, *p.inner_loss, p.inner_targets, p.lambda, w);
}

double value_at(const EmpiricalProblem& p, const VectorXd& w) {
  return value_hat(w, solve(p, w), *p.outer_loss, p.outer_targets);
}

VectorXd central_difference(const EmpiricalProblem& p, const VectorXd& w, double h) {
  VectorXd g(w.size());
  for (Index l = 0; l < w.size(); ++l) {
    VectorXd wp = w, wm = w;
    wp(l) += h;
    wm(l) -= h;
    g(l) = (value_at(p, wp) - value_at(p, wm)) / (2 * h);
  }
  return g;
}

struct BothGradients {
  VectorXd implicit;
  VectorXd plugin;
  AdjointSolution adjoint;
  EstimatorWorkspace ws;
};

BothGradients both(const EmpiricalProblem& p, const VectorXd& w) {
  const InnerSolution sol = solve(p, w);
  BothGradients out;
  out.ws = assemble_workspace(p, w, sol);
  out.implicit = grad_implicit(out.ws);
  out.adjoint = adjoint_solve(out.ws, p.gram);
  out.plugin = grad_plugin(out.ws, adjoint_evals(out.ws, p.gram, out.adjoint));
  return out;
}

MatrixXd treatment_features(const EmpiricalProblem& prob) {
  VectorXd t(prob.n());
  for (Index i = 0; i < prob.n(); ++i) t(i) = target_value(prob.inner_targets[i]);
  return SineFeatureMap(prob.d()).matrix(t);
}

}  // namespace

TEST_CASE("value_hat examples") {
  const IvOuterLoss outer(1);
  InnerSolution sol;
  sol.pred_outer = VectorXd::Constant(1, 1.0);
  const std::vector<Target> zero{Response{0.0}};
  CHECK(value_hat(VectorXd::Zero(1), sol, outer, zero) == 0.5);
  const std::vector<Target> same{Response{1.0}};
  CHECK(value_hat(VectorXd::Zero(1), sol, outer, same) == 0.0);
  sol.pred_outer(0) = NAN;
  CHECK_THROWS_AS(value_hat(VectorXd::Zero(1), sol, outer, zero), NumericError);
}

TEST_CASE("value_hat matches the closed-form matrix expression") {
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const EmpiricalProblem prob = testing::random_iv_problem(rng, testing::random_size(rng, 1, 30), testing::random_size(rng, 1, 30));
    const VectorXd w = testing::random_vector(rng, 4, -1, 2);
    VectorXd y(prob.m());
    for (Index j = 0; j < prob.m(); ++j) y(j) = target_value(prob.outer_targets[j]);
    // Independent assembly: explicit inverse of K + n lambda I.
    MatrixXd A = prob.gram.K;
    A.diagonal().array() += static_cast<double>(prob.n()) * prob.lambda;
    const VectorXd pred = prob.gram.K_bar * A.inverse() * treatment_features(prob) * w;
    const double expected = 0.5 / static_cast<double>(prob.m()) * (pred - y).squaredNorm();
    CHECK(value_at(prob, w) == doctest::Approx(expected).epsilon(1e-10));
    const IvClosedForm cf(prob.gram, treatment_features(prob), y, prob.lambda);
    CHECK(cf.value(w) == doctest::Approx(expected).epsilon(1e-10));
    CHECK((cf.grad(w) - both(prob, w).implicit).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("grad_implicit: 1 x 1 instance") {
  // K = K_bar = [1], phi replaced by a fixed feature f through the closed form:
  // gamma = f w / 2, F_hat = 1/2 (f w / 2 - y)^2, gradient (f / 2)(f w / 2 - y).
  // With f = sin(t + 1) at t = 0.2 and w = 1.5, y = 0.3.
  EmpiricalProblem p;
  p.gram.K = MatrixXd::Ones(1, 1);
  p.gram.K_bar = MatrixXd::Ones(1, 1);
  p.gram.K_tilde = MatrixXd::Ones(1, 1);
  p.lambda = 1.0;
  p.inner_loss = std::make_shared<IvInnerLoss>(SineFeatureMap(1));
  p.outer_loss = std::make_shared<IvOuterLoss>(1);
  p.inner_targets = {Treatment{0.2}};
  p.outer_targets = {Response{0.3}};
  const double f = std::sin(1.2);
  const double expected = 0.5 * f * (0.5 * f * 1.5 - 0.3);
  const BothGradients g = both(p, VectorXd::Constant(1, 1.5));
  CHECK(g.implicit(0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(g.plugin(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("IV outer loss: the gradient is the pure implicit term") {
  Rng rng(2);
  const EmpiricalProblem prob = testing::random_iv_problem(rng, 12, 9);
  const VectorXd w = testing::random_vector(rng, 4, 0, 1);
  const BothGradients g = both(prob, w);
  CHECK(g.ws.D_omega_out.cwiseAbs().maxCoeff() == 0.0);
  const VectorXd direct =
      -(g.ws.D_omega_v_in * g.ws.M.partialPivLu().solve(g.ws.u)) / static_cast<double>(prob.m());
  CHECK((direct - g.implicit).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("property: estimators match finite differences") {
  Rng rng(3);
  int checked = 0;
  for (int k = 0; k < 50; ++k) {
    const int kind = k % 3;
    const Index n = testing::random_size(rng, 2, 30), m = testing::random_size(rng, 2, 30);
    const EmpiricalProblem prob = kind == 0   ? testing::random_iv_problem(rng, n, m)
                                  : kind == 1 ? testing::random_shift_problem(rng, n, m)
                                              : testing::random_logcosh_problem(rng, n, m);
    const VectorXd w = kind == 1 ? testing::random_vector(rng, 1, 0.3, 2.0) : testing::random_vector(rng, prob.d(), -1, 1);
    const BothGradients g = both(prob, w);
    if (g.implicit.norm() < 1e-8) continue;
    const VectorXd fd = central_difference(prob, w, 1e-6);
    CHECK((fd - g.implicit).norm() / g.implicit.norm() <= 1e-5);
    CHECK((fd - g.plugin).norm() / g.plugin.norm() <= 1e-5);
    ++checked;
  }
  CHECK(checked >= 45);
}

TEST_CASE("property: implicit and plug-in gradients coincide") {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const int kind = k % 3;
    const Index n = testing::random_size(rng, 1, 50), m = testing::random_size(rng, 1, 50);
    const EmpiricalProblem prob = kind == 0   ? testing::random_iv_problem(rng, n, m)
                                  : kind == 1 ? testing::random_shift_problem(rng, n, m)
                                              : testing::random_logcosh_problem(rng, n, m);
    const VectorXd w = kind == 1 ? testing::random_vector(rng, 1, 0.1, 3.0) : testing::random_vector(rng, prob.d(), -2, 2);
    const BothGradients g = both(prob, w);
    CHECK((g.implicit - g.plugin).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + g.implicit.norm()));
    CHECK(g.adjoint.residual <= 1e-8);
    CHECK(g.ws.xi_norm_sq >= 0.0);
    CHECK(g.ws.p_scalar >= static_cast<double>(n) * prob.lambda * g.ws.xi_norm_sq * (1 - 1e-12));
  }
}

TEST_CASE("adjoint evaluations equal -(n/m) M^{-1} u") {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const EmpiricalProblem prob = k % 2 ? testing::random_iv_problem(rng, 25, 15) : testing::random_logcosh_problem(rng, 25, 15);
    const BothGradients g = both(prob, testing::random_vector(rng, prob.d(), -1, 1));
    const VectorXd a = adjoint_evals(g.ws, prob.gram, g.adjoint);
    const VectorXd expected = -(25.0 / 15.0) * g.ws.M.partialPivLu().solve(g.ws.u);
    CHECK((a - expected).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + expected.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("zero outer forcing gives a zero adjoint") {
  Rng rng(6);
  EmpiricalProblem prob = testing::random_iv_problem(rng, 10, 6);
  const VectorXd w = testing::random_vector(rng, 4, -1, 1);
  const InnerSolution sol = solve(prob, w);
  for (Index j = 0; j < prob.m(); ++j) prob.outer_targets[j] = Response{sol.pred_outer(j)};
  const BothGradients g = both(prob, w);
  CHECK(g.ws.D_v_out.cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(g.adjoint.alpha.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::isfinite(g.adjoint.beta));
  CHECK(g.plugin.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("plug-in gradient vanishes without cross and outer parameter derivatives") {
  EstimatorWorkspace ws;
  ws.D_omega_out = MatrixXd::Zero(3, 5);
  ws.D_omega_v_in = MatrixXd::Zero(3, 4);
  ws.D_v_out = VectorXd::Ones(5);
  ws.D_vv_in = VectorXd::Ones(4);
  CHECK(grad_plugin(ws, VectorXd::Ones(4)) == VectorXd::Zero(3));
}

TEST_CASE("property: duplicating the outer sample leaves value and gradients unchanged") {
  Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    const EmpiricalProblem prob = k % 2 ? testing::random_iv_problem(rng, 15, 8) : testing::random_shift_problem(rng, 15, 8);
    EmpiricalProblem dup = prob;
    dup.gram.K_bar = MatrixXd(16, 15);
    dup.gram.K_bar << prob.gram.K_bar, prob.gram.K_bar;
    dup.gram.K_tilde = MatrixXd(16, 16);
    dup.gram.K_tilde << prob.gram.K_tilde, prob.gram.K_tilde, prob.gram.K_tilde, prob.gram.K_tilde;
    dup.outer_targets.insert(dup.outer_targets.end(), prob.outer_targets.begin(), prob.outer_targets.end());
    const VectorXd w = k % 2 ? testing::random_vector(rng, 4, -1, 1) : testing::random_vector(rng, 1, 0.5, 2);
    CHECK(value_at(dup, w) == doctest::Approx(value_at(prob, w)).epsilon(1e-12));
    const BothGradients a = both(prob, w), b = both(dup, w);
    CHECK((a.implicit - b.implicit).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.plugin - b.plugin).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("property: the adjoint coefficients minimize the adjoint objective") {
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    const EmpiricalProblem prob = k % 2 ? testing::random_iv_problem(rng, 20, 12) : testing::random_logcosh_problem(rng, 20, 12);
    const BothGradients g = both(prob, testing::random_vector(rng, prob.d(), -1, 1));
    const double base = adjoint_objective(g.ws, prob.gram, g.adjoint.alpha, g.adjoint.beta);
    for (int trial = 0; trial < 20; ++trial) {
      VectorXd delta = testing::random_vector(rng, prob.n() + 1, -1, 1);
      delta *= 1e-3 / delta.norm();
      const double moved = adjoint_objective(g.ws, prob.gram, g.adjoint.alpha + delta.head(prob.n()),
                                             g.adjoint.beta + delta(prob.n()));
      CHECK(moved >= base - 1e-9);
    }
  }
}

TEST_CASE("HypergradEvaluator caches, warm-starts and reports the estimator gap") {
  Rng rng(9);
  const EmpiricalProblem prob = testing::random_logcosh_problem(rng, 30, 20);
  HypergradEvaluator eval(prob);
  const VectorXd w = testing::random_vector(rng, 3, -1, 1);
  const HypergradResult r = eval.evaluate(w, GradientPath::Both);
  CHECK(r.estimator_gap <= 1e-8 * (1.0 + r.grad.norm()));
  CHECK(r.alpha.size() == 30);
  CHECK(r.value == doctest::Approx(value_at(prob, w)).epsilon(1e-12));
  CHECK(&eval.inner(w) == &eval.inner(w));
  const VectorXd w2 = w + VectorXd::Constant(3, 0.05);
  CHECK((eval.grad(w2) - both(prob, w2).implicit).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::isnan(eval.evaluate(w2).estimator_gap));

  EmpiricalProblem bad = prob;
  bad.inner_targets.pop_back();
  CHECK_THROWS_AS(HypergradEvaluator{bad}, InputError);
}
