// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
//   kbo_acceptance [oracle-cache-path]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "exact_features.hpp"
#include "kbo/config.hpp"
#include "kbo/datasets.hpp"
#include "kbo/hypergrad.hpp"
#include "kbo/inner_solver.hpp"
#include "kbo/iv_closed_form.hpp"
#include "kbo/optimizer.hpp"
#include "kbo/population_oracle.hpp"
#include "kbo/study.hpp"
#include "support.hpp"

using namespace kbo;

namespace {

// Pinned tolerances.
constexpr double kEquivRel = 1e-8;
constexpr double kFdStep = 1e-6;
constexpr double kFdRel = 1e-5;
constexpr double kNearCritical = 1e-6;
constexpr double kCfNewtonGap = 1e-8;
constexpr double kSlopeLo = -0.75;
constexpr double kSlopeHi = -0.30;
constexpr double kDiagonalFraction = 0.70;
constexpr double kGdTol = 1e-5;
constexpr double kBlockRel = 1e-10;
constexpr double kOracleFdRel = 1e-7;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double value_at(const EmpiricalProblem& p, const VectorXd& w) {
  const InnerSolution s = solve_inner_newton(p.gram, *p.inner_loss, p.inner_targets, p.lambda, w);
  return value_hat(w, s, *p.outer_loss, p.outer_targets);
}

EmpiricalProblem random_instance(Rng& rng, bool iv, Index n, Index m) {
  return iv ? testing::random_iv_problem(rng, n, m) : testing::random_shift_problem(rng, n, m);
}

VectorXd random_probe(Rng& rng, const EmpiricalProblem& p, bool iv) {
  return iv ? testing::random_vector(rng, p.d(), -2, 2) : testing::random_vector(rng, 1, 0.1, 3.0);
}

Outcome estimator_equivalence() {
  Rng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const bool iv = k % 2 == 0;
    const EmpiricalProblem p =
        random_instance(rng, iv, testing::random_size(rng, 1, 50), testing::random_size(rng, 1, 50));
    const VectorXd w = random_probe(rng, p, iv);
    HypergradEvaluator ev(p);
    const HypergradResult r = ev.evaluate(w, GradientPath::Both);
    worst = std::max(worst, r.estimator_gap / (1.0 + r.grad.norm()));
  }
  return {worst <= kEquivRel, "100 instances, max gap/(1+|g|) = " + fmt("%.2e", worst)};
}

Outcome finite_differences() {
  Rng rng(102);
  double worst = 0.0;
  int probes = 0, skipped = 0;
  while (probes < 50) {
    const bool iv = (probes + skipped) % 2 == 0;
    const EmpiricalProblem p =
        random_instance(rng, iv, testing::random_size(rng, 2, 40), testing::random_size(rng, 2, 40));
    const VectorXd w = random_probe(rng, p, iv);
    HypergradEvaluator ev(p);
    const HypergradResult r = ev.evaluate(w, GradientPath::Both);
    if (r.grad.norm() <= kNearCritical) {
      ++skipped;
      continue;
    }
    const InnerSolution sol = ev.inner(w);
    const EstimatorWorkspace ws = assemble_workspace(p, w, sol);
    const VectorXd implicit = grad_implicit(ws);
    const VectorXd plugin = grad_plugin(ws, adjoint_evals(ws, p.gram, adjoint_solve(ws, p.gram)));
    VectorXd fd(w.size());
    for (Index l = 0; l < w.size(); ++l) {
      VectorXd wp = w, wm = w;
      wp(l) += kFdStep;
      wm(l) -= kFdStep;
      fd(l) = (value_at(p, wp) - value_at(p, wm)) / (2 * kFdStep);
    }
    worst = std::max({worst, (fd - implicit).norm() / implicit.norm(), (fd - plugin).norm() / plugin.norm()});
    ++probes;
  }
  return {worst <= kFdRel, "50 probes (" + std::to_string(skipped) + " near-critical skipped), max rel err = " +
                               fmt("%.2e", worst)};
}

Outcome closed_form_newton() {
  Rng rng(103);
  double worst = 0.0;
  int max_iters = 0;
  for (int k = 0; k < 50; ++k) {
    const EmpiricalProblem p = testing::random_iv_problem(rng, testing::random_size(rng, 1, 100), 5);
    const VectorXd w = testing::random_vector(rng, p.d(), -2, 2);
    VectorXd t(p.n());
    for (Index i = 0; i < p.n(); ++i) t(i) = target_value(p.inner_targets[i]);
    const InnerSolution cf = solve_inner_closed_form(p.gram, SineFeatureMap(p.d()).matrix(t), p.lambda, w);
    const InnerSolution nt = solve_inner_newton(p.gram, *p.inner_loss, p.inner_targets, p.lambda, w);
    worst = std::max(worst, (cf.gamma - nt.gamma).cwiseAbs().maxCoeff());
    max_iters = std::max(max_iters, nt.iterations);
  }
  return {worst <= kCfNewtonGap && max_iters == 1,
          "50 instances, max |dgamma|_inf = " + fmt("%.2e", worst) + ", max Newton steps = " + std::to_string(max_iters)};
}

Outcome norm_bounds() {
  Rng rng(104);
  int violations = 0, instances = 0;
  double tightest = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int kind = k % 3;
    const Index n = testing::random_size(rng, 1, 60), m = testing::random_size(rng, 1, 30);
    const double lambda = std::exp(rng.uniform(std::log(1e-3), 0.0));
    const EmpiricalProblem p = kind == 0   ? testing::random_iv_problem(rng, n, m, 4, lambda)
                               : kind == 1 ? testing::random_shift_problem(rng, n, m, lambda)
                                           : testing::random_logcosh_problem(rng, n, m, 3, lambda);
    const VectorXd w = kind == 1 ? testing::random_vector(rng, 1, 0.1, 3.0) : testing::random_vector(rng, p.d(), -2, 2);
    const InnerSolution s = solve_inner_newton(p.gram, *p.inner_loss, p.inner_targets, p.lambda, w);
    const double B = inner_gradient_bound(*p.inner_loss, p.inner_targets, w);
    const InnerNormBounds b = inner_norm_bounds(B, p.gram.kappa, p.lambda);
    const double rkhs = std::sqrt(std::max(s.h_norm_sq, 0.0));
    const double sup = std::max(s.pred_inner.cwiseAbs().maxCoeff(), s.pred_outer.cwiseAbs().maxCoeff());
    if (rkhs > b.rkhs_norm || sup > b.sup_value) ++violations;
    if (b.rkhs_norm > 0) tightest = std::max(tightest, rkhs / b.rkhs_norm);
    ++instances;
  }
  return {violations == 0, std::to_string(instances) + " instances, " + std::to_string(violations) +
                               " violations, max |h|/bound = " + fmt("%.3f", tightest)};
}

struct StudyOutcome {
  StudyReport report;
  std::vector<CellSummary> summary;
  double seconds = 0.0;
};

StudyOutcome run_desk_study(const std::string& cache) {
  KboConfig c;  // defaults: 5-point grid, 20 seeds, 1e5 oracle samples, D = 2048
  c.seeds = 20;
  const auto start = std::chrono::steady_clock::now();
  const StudySetup setup = prepare_study(c, cache);
  StudyOutcome out;
  out.report = run_generalization_study(setup, full_grid_cells(c.grid));
  out.summary = summarize(out.report);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Outcome generalization_rate(const StudyOutcome& study) {
  Outcome o;
  std::ostringstream os;
  for (int k = 0; k < 4; ++k) {
    const SlopeFit fit = diagonal_slope(study.summary, static_cast<Metric>(k));
    const bool ok = fit.slope >= kSlopeLo && fit.slope <= kSlopeHi;
    o.pass = o.pass && ok;
    os << (k ? ", " : "") << kMetricNames[k] << ' ' << fmt("%.3f", fit.slope) << (ok ? "" : "(out)");
  }
  o.detail = "slopes " + os.str() + " vs [-0.75, -0.30]";
  return o;
}

Outcome heatmap_diagonal(const StudyOutcome& study) {
  Outcome o;
  std::ostringstream os;
  for (int k = 0; k < 4; ++k) {
    const DiagonalCheck d = heatmap_diagonal_check(study.summary, static_cast<Metric>(k));
    const bool ok = d.fraction() >= kDiagonalFraction;
    o.pass = o.pass && ok;
    os << (k ? ", " : "") << kMetricNames[k] << ' ' << d.hits << '/' << d.budgets;
  }
  o.detail = "budgets with minimum on/next to diagonal: " + os.str() + " (need >= 70%)";
  return o;
}

struct IvFixture {
  IvDataset ds;
  GramSet gram;
  std::unique_ptr<IvClosedForm> cf;
  explicit IvFixture(std::uint64_t seed) {
    IvDatasetConfig c;
    c.seed = seed;
    c.n = 100;
    c.m = 100;
    ds = generate_iv_data(c);
    gram = GramSet::build(KernelSpec{}, ds.inner_x, ds.outer_x);
    cf = std::make_unique<IvClosedForm>(gram, SineFeatureMap(4).matrix(ds.inner_t), ds.outer_y, 0.01);
  }
  ValueFn value() const {
    return [this](const VectorXd& w) { return cf->value(w); };
  }
  GradFn grad() const {
    return [this](const VectorXd& w) { return cf->grad(w); };
  }
};

Outcome optimizer_contract(const StudyOutcome& study) {
  int nonmonotone = 0, unconverged = 0;
  for (const auto& r : study.report.rows) {
    if (!r.monotone) ++nonmonotone;
    if (r.status != "ok") ++unconverged;
  }

  bool identical = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const IvFixture fx(seed);
    const VectorXd w0 = VectorXd::LinSpaced(4, 0.1, 0.9);
    GdOptions opts;
    opts.tol = kGdTol;
    const Trajectory a = gd_run(w0, fx.grad(), fx.value(), opts);
    const Trajectory b = projected_gd_run(w0, ConstraintSet::unconstrained(), fx.grad(), fx.value(), opts);
    identical = identical && a.points.size() == b.points.size();
    for (std::size_t i = 0; identical && i < a.points.size(); ++i) {
      identical = a.points[i].omega == b.points[i].omega && a.points[i].value == b.points[i].value &&
                  a.points[i].step_size == b.points[i].step_size;
    }
  }

  // Armijo: (t + 1) eta_min c s_t^2 <= F_0 - F_T, so s_t sqrt(t + 1) is bounded.
  const IvFixture fx(11);
  GdOptions opts;
  opts.tol = 1e-14;
  opts.max_iter = 200;
  const Trajectory t = gd_run(VectorXd::Constant(4, 0.5), fx.grad(), fx.value(), opts);
  double eta_min = 1.0;
  for (std::size_t i = 0; i + 1 < t.points.size(); ++i) eta_min = std::min(eta_min, t.points[i].step_size);
  const double bound = std::sqrt((t.points.front().value - t.final_point().value) / (opts.line_search.armijo_c * eta_min));
  const auto s = t.running_min_grad_norm();
  double worst = 0.0;
  for (std::size_t i = 1; i < s.size() && i <= 200; ++i) worst = std::max(worst, s[i] * std::sqrt(i + 1.0));
  const bool bounded = worst <= bound && s.size() > 1;

  return {nonmonotone == 0 && unconverged == 0 && identical && bounded,
          std::to_string(study.report.rows.size()) + " study runs: " + std::to_string(nonmonotone) +
              " non-monotone, " + std::to_string(unconverged) + " not at tolerance; projected==plain " +
              (identical ? "yes" : "no") + "; max s_t*sqrt(t+1) = " + fmt("%.3g", worst) + " <= " + fmt("%.3g", bound)};
}

double rel_diff(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(a.cwiseAbs().maxCoeff(), 1e-300);
}

Outcome oracle_integrity() {
  IvDatasetConfig dc;
  dc.seed = 5;
  dc.truth_seed = 5;
  const RffFeatureSource feats(sample_rff(KernelSpec{}, 256, 7));
  const IvSampleStream inner(dc, SampleRole::Inner, 1000);
  const IvSampleStream outer(dc, SampleRole::Outer, 800);
  const SineFeatureMap phi(4);
  const RffOracle ref = build_oracle(feats, inner, outer, phi, 0.01, 1000);
  double block = 0.0;
  for (Index bs : {1, 13, 250, 999}) {
    const RffOracle o = build_oracle(feats, inner, outer, phi, 0.01, bs);
    block = std::max({block, rel_diff(o.XtX, ref.XtX), rel_diff(o.XtF, ref.XtF), rel_diff(o.TtT, ref.TtT),
                      rel_diff(o.Tty, ref.Tty), std::abs(o.y_norm_sq - ref.y_norm_sq) / ref.y_norm_sq});
  }

  Rng rng(108);
  double fd_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const VectorXd w = testing::random_vector(rng, 4, -1, 2);
    const VectorXd g = oracle_grad(ref, w);
    VectorXd fd(4);
    const double h = 1e-4;
    for (Index l = 0; l < 4; ++l) {
      VectorXd wp = w, wm = w;
      wp(l) += h;
      wm(l) -= h;
      fd(l) = (oracle_value(ref, wp) - oracle_value(ref, wm)) / (2 * h);
    }
    fd_err = std::max(fd_err, (fd - g).norm() / g.norm());
  }

  // RFF oracle against the exact-kernel value on the same sample.
  IvDatasetConfig tc = dc;
  tc.n = 150;
  tc.m = 150;
  const IvDataset ds = generate_iv_data(tc);
  const MemorySampleStream in_s(ds.inner_x, ds.inner_t), out_s(ds.outer_x, ds.outer_y);
  const GramSet gram = GramSet::build(KernelSpec{}, ds.inner_x, ds.outer_x);
  const IvClosedForm exact(gram, phi.matrix(ds.inner_t), ds.outer_y, 0.01);
  const VectorXd w = VectorXd::Constant(4, 0.5);
  std::vector<double> medians;
  constexpr int kDraws = 9;
  for (Index D : {256, 1024, 4096}) {
    std::vector<double> errs;
    for (int s = 0; s < kDraws; ++s) {
      const RffOracle o = build_oracle(RffFeatureSource(sample_rff(KernelSpec{}, D, 200 + s)), in_s, out_s, phi, 0.01, 150);
      errs.push_back(std::abs(oracle_value(o, w) - exact.value(w)));
    }
    std::nth_element(errs.begin(), errs.begin() + kDraws / 2, errs.end());
    medians.push_back(errs[kDraws / 2]);
  }
  const bool trend = medians[1] < medians[0] && medians[2] < medians[1];
  return {block <= kBlockRel && fd_err <= kOracleFdRel && trend,
          "block rel diff " + fmt("%.1e", block) + ", fd rel err " + fmt("%.1e", fd_err) + ", median RFF error " +
              fmt("%.2e", medians[0]) + " > " + fmt("%.2e", medians[1]) + " > " + fmt("%.2e", medians[2])};
}

std::string read_without_wall_ms(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 10) cells[8].clear();
    for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
    out << '\n';
  }
  return out.str();
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("kbo_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "study.cfg");
    cfg << "seed = 9\nstudy.grid = 50, 100, 200\nstudy.seeds = 3\noracle.samples = 5000\noracle.features = 256\n";
  }
  const std::string cli = KBO_CLI_PATH;
  auto run = [&](const char* threads, const char* name) {
    const std::string cmd = std::string("KBO_THREADS=") + threads + " '" + cli + "' experiment --config '" +
                            (dir / "study.cfg").string() + "' --full-grid --out '" + (dir / name).string() + "' > /dev/null";
    return std::system(cmd.c_str());
  };
  const int rc1 = run("1", "a.csv");
  const int rc2 = run("2", "b.csv");
  const std::string a = read_without_wall_ms((dir / "a.csv").string());
  const std::string b = read_without_wall_ms((dir / "b.csv").string());
  const auto lines = std::count(a.begin(), a.end(), '\n');
  fs::remove_all(dir);
  const bool pass = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;
  return {pass, "two runs (1 and 2 workers), " + std::to_string(lines) + " lines, " +
                    (a == b ? "identical modulo wall_ms" : "differ") +
                    (rc1 || rc2 ? ", exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) : "")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cache = argc > 1 ? argv[1] : "";
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %d: %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
    std::fflush(stdout);
  };

  report(1, "estimator equivalence", estimator_equivalence);
  report(2, "hypergradient vs finite differences", finite_differences);
  report(3, "closed form vs Newton", closed_form_newton);
  report(4, "inner norm bounds", norm_bounds);

  StudyOutcome study;
  bool study_ok = true;
  try {
    study = run_desk_study(cache);
  } catch (const std::exception& e) {
    study_ok = false;
    std::printf("desk study failed: %s\n", e.what());
  }
  if (study_ok) std::printf("desk study: %zu runs in %.1f s\n", study.report.rows.size(), study.seconds);
  auto need_study = [&](const std::function<Outcome()>& fn) {
    return [&, fn]() { return study_ok ? fn() : Outcome{false, "desk study did not run"}; };
  };
  report(5, "generalization rate", need_study([&] { return generalization_rate(study); }));
  report(6, "heatmap diagonal", need_study([&] { return heatmap_diagonal(study); }));
  report(7, "optimizer contract", need_study([&] { return optimizer_contract(study); }));
  report(8, "oracle integrity", oracle_integrity);
  report(9, "determinism", determinism);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
