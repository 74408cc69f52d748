// Command-line front end: solve, gradient checks, studies and slope fits.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kbo/config.hpp"
#include "kbo/errors.hpp"
#include "kbo/hypergrad.hpp"
#include "kbo/instances.hpp"
#include "kbo/optimizer.hpp"
#include "kbo/rng.hpp"
#include "kbo/study.hpp"

namespace {

using kbo::Index;
using kbo::VectorXd;

constexpr std::uint64_t kTagSolve = 0x736f6c7665ULL;
constexpr std::uint64_t kTagProbe = 0x70726f6265ULL;

VectorXd parse_vector(const std::string& text, Index d) {
  VectorXd w(d);
  std::stringstream ss(text);
  std::string item;
  Index k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= d) throw kbo::InputError("--omega0 has more than " + std::to_string(d) + " entries");
    try {
      w(k++) = std::stod(item);
    } catch (const std::logic_error&) {
      throw kbo::InputError("--omega0: cannot parse '" + item + "'");
    }
  }
  if (k != d) throw kbo::InputError("--omega0 needs " + std::to_string(d) + " entries");
  return w;
}

std::string format_vector(const VectorXd& w) {
  std::ostringstream os;
  os.precision(10);
  for (Index k = 0; k < w.size(); ++k) os << (k ? "," : "") << w(k);
  return os.str();
}

int cmd_solve(const std::string& config_path, const std::string& omega0_text) {
  const kbo::KboConfig cfg = kbo::load_config(config_path);
  kbo::HypergradEvaluator eval(kbo::make_problem(cfg, kbo::data_seed(cfg, 0)));
  const VectorXd omega0 = omega0_text.empty()
                              ? kbo::random_parameter(cfg, kbo::derive_seed(cfg.seed, {kTagSolve}))
                              : parse_vector(omega0_text, cfg.d);
  const kbo::ConstraintSet set = kbo::parameter_set(cfg);
  kbo::GdOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  const kbo::Trajectory traj = kbo::projected_gd_run(
      set.project(omega0), set, [&](const VectorXd& w) { return eval.grad(w); },
      [&](const VectorXd& w) { return eval.value(w); }, opts);
  const auto& last = traj.final_point();
  std::printf("omega = %s\n", format_vector(last.omega).c_str());
  std::printf("value = %.12g\n", last.value);
  std::printf("grad_norm = %.6e\n", last.grad_norm);
  std::printf("iterations = %d\n", traj.iterations());
  std::printf("termination = %s\n", kbo::to_string(traj.termination).c_str());
  switch (traj.termination) {
    case kbo::Termination::Tolerance: return 0;
    case kbo::Termination::MaxIter: return 2;
    case kbo::Termination::LineSearchFailure: return 3;
  }
  return 1;
}

int cmd_grad_check(const std::string& config_path, int probes) {
  const kbo::KboConfig cfg = kbo::load_config(config_path);
  constexpr double kStep = 1e-6;
  constexpr double kLimit = 1e-4;
  std::printf("%6s %14s %14s %14s\n", "probe", "grad_norm", "rel_implicit", "rel_plugin");
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    kbo::HypergradEvaluator eval(kbo::make_problem(cfg, kbo::derive_seed(cfg.seed, {kTagProbe, 0, std::uint64_t(k)})));
    const VectorXd w = kbo::random_parameter(cfg, kbo::derive_seed(cfg.seed, {kTagProbe, 1, std::uint64_t(k)}));
    const kbo::HypergradResult res = eval.evaluate(w, kbo::GradientPath::Implicit);
    const VectorXd plugin = eval.evaluate(w, kbo::GradientPath::Plugin).grad;
    VectorXd fd(w.size());
    for (Index l = 0; l < w.size(); ++l) {
      VectorXd wp = w, wm = w;
      wp(l) += kStep;
      wm(l) -= kStep;
      fd(l) = (eval.value(wp) - eval.value(wm)) / (2.0 * kStep);
    }
    const double gnorm = res.grad.norm();
    if (gnorm < 1e-8) {
      std::printf("%6d %14.6e %14s %14s\n", k, gnorm, "skipped", "skipped");
      continue;
    }
    const double ri = (fd - res.grad).norm() / gnorm;
    const double rp = (fd - plugin).norm() / gnorm;
    worst = std::max({worst, ri, rp});
    std::printf("%6d %14.6e %14.6e %14.6e\n", k, gnorm, ri, rp);
  }
  std::printf("max_rel_err = %.6e (limit %.0e)\n", worst, kLimit);
  return worst <= kLimit ? 0 : 1;
}

int cmd_equiv_check(const std::string& config_path, int trials) {
  const kbo::KboConfig cfg = kbo::load_config(config_path);
  constexpr double kLimit = 1e-6;
  double worst = 0.0;
  double worst_scaled = 0.0;
  for (int k = 0; k < trials; ++k) {
    kbo::HypergradEvaluator eval(kbo::make_problem(cfg, kbo::derive_seed(cfg.seed, {kTagProbe, 2, std::uint64_t(k)})));
    const VectorXd w = kbo::random_parameter(cfg, kbo::derive_seed(cfg.seed, {kTagProbe, 3, std::uint64_t(k)}));
    const kbo::HypergradResult res = eval.evaluate(w, kbo::GradientPath::Both);
    worst = std::max(worst, res.estimator_gap);
    worst_scaled = std::max(worst_scaled, res.estimator_gap / (1.0 + res.grad.norm()));
  }
  std::printf("trials = %d\nmax_gap = %.6e\nmax_gap_scaled = %.6e\n", trials, worst, worst_scaled);
  return worst <= kLimit ? 0 : 1;
}

int cmd_experiment(const std::string& config_path, const std::string& out, const std::string& cache,
                   bool full_grid) {
  const kbo::KboConfig cfg = kbo::load_config(config_path);
  const kbo::StudySetup setup = kbo::prepare_study(cfg, cache);
  const auto cells = full_grid ? kbo::full_grid_cells(cfg.grid) : kbo::diagonal_cells(cfg.grid);
  const kbo::StudyReport report = kbo::run_generalization_study(setup, cells);
  std::ofstream os(out);
  if (!os) throw kbo::InputError("cannot write " + out);
  kbo::write_report_csv(report, os, kbo::seed_policy_comment(cfg));
  int failed = 0;
  for (const auto& r : report.rows) failed += r.status.rfind("error:", 0) == 0;
  std::printf("rows = %zu\nerrors = %d\n", report.rows.size(), failed);
  return 0;
}

int cmd_slope(const std::string& in_path, const std::string& metric) {
  std::ifstream is(in_path);
  if (!is) throw kbo::InputError("cannot read " + in_path);
  if (metric != "all") kbo::metric_from_name(metric);
  const auto summary = kbo::summarize(kbo::read_report_csv(is));
  std::printf("%-16s %10s %10s\n", "metric", "slope", "stderr");
  for (const char* name : kbo::kMetricNames) {
    if (metric != "all" && metric != name) continue;
    const kbo::SlopeFit fit = kbo::diagonal_slope(summary, kbo::metric_from_name(name));
    std::printf("%-16s %10.4f %10.4f\n", name, fit.slope, fit.stderr_slope);
  }
  return 0;
}

int cmd_heatmap(const std::string& config_path, const std::string& out, const std::string& cache,
                const std::string& report_path) {
  const kbo::KboConfig cfg = kbo::load_config(config_path);
  const kbo::StudySetup setup = kbo::prepare_study(cfg, cache);
  const kbo::StudyReport report = kbo::run_generalization_study(setup, kbo::full_grid_cells(cfg.grid));
  if (!report_path.empty()) {
    std::ofstream rs(report_path);
    if (!rs) throw kbo::InputError("cannot write " + report_path);
    kbo::write_report_csv(report, rs, kbo::seed_policy_comment(cfg));
  }
  const auto summary = kbo::summarize(report);
  std::ofstream os(out);
  if (!os) throw kbo::InputError("cannot write " + out);
  kbo::write_heatmap_csv(summary, os);
  for (std::size_t k = 0; k < kbo::kMetricNames.size(); ++k) {
    const kbo::DiagonalCheck check = kbo::heatmap_diagonal_check(summary, static_cast<kbo::Metric>(k));
    std::printf("%-16s diagonal budgets %d/%d\n", kbo::kMetricNames[k], check.hits, check.budgets);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel bilevel optimization toolkit"};
  app.require_subcommand(1);

  std::string config, omega0, out, in, cache, metric = "all", report_path;
  int probes = 20, trials = 20;
  bool full_grid = false;

  auto* solve = app.add_subcommand("solve", "Run bilevel gradient descent on one instance");
  solve->add_option("--config", config)->required();
  solve->add_option("--omega0", omega0, "Comma-separated initial parameter");

  auto* grad_check = app.add_subcommand("grad-check", "Compare both gradient estimators with finite differences");
  grad_check->add_option("--config", config)->required();
  grad_check->add_option("--probes", probes)->check(CLI::PositiveNumber);

  auto* equiv = app.add_subcommand("equiv-check", "Gap between the implicit and plug-in gradients");
  equiv->add_option("--config", config)->required();
  equiv->add_option("--trials", trials)->check(CLI::PositiveNumber);

  auto* experiment = app.add_subcommand("experiment", "Generalization study over the m = n grid");
  experiment->add_option("--config", config)->required();
  experiment->add_option("--out", out)->required();
  experiment->add_option("--oracle-cache", cache, "Oracle snapshot to reuse or create");
  experiment->add_flag("--full-grid", full_grid, "Run every (n, m) pair instead of m = n");

  auto* slope = app.add_subcommand("slope", "Log-log slopes from a study report");
  slope->add_option("--in", in)->required();
  slope->add_option("--metric", metric, "val_err, grad_err, final_grad_norm, min_grad_norm or all");

  auto* heatmap = app.add_subcommand("heatmap", "Mean errors over the full (n, m) grid");
  heatmap->add_option("--config", config)->required();
  heatmap->add_option("--out", out)->required();
  heatmap->add_option("--oracle-cache", cache, "Oracle snapshot to reuse or create");
  heatmap->add_option("--report", report_path, "Also write the per-run report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(config, omega0);
    if (*grad_check) return cmd_grad_check(config, probes);
    if (*equiv) return cmd_equiv_check(config, trials);
    if (*experiment) return cmd_experiment(config, out, cache, full_grid);
    if (*slope) return cmd_slope(in, metric);
    if (*heatmap) return cmd_heatmap(config, out, cache, report_path);
  } catch (const kbo::Error& e) {
    std::fprintf(stderr, "kbo: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kbo: %s\n", e.what());
    return 5;
  }
  return 1;
}
