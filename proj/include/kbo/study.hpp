#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kbo/config.hpp"
#include "kbo/population_oracle.hpp"
#include "kbo/slope.hpp"

namespace kbo {

// Order of the four per-run error metrics everywhere in this module.
enum class Metric { ValErr = 0, GradErr = 1, FinalGradNorm = 2, MinGradNorm = 3 };
inline constexpr std::array<const char*, 4> kMetricNames = {"val_err", "grad_err", "final_grad_norm",
                                                             "min_grad_norm"};
Metric metric_from_name(const std::string& name);

struct StudyRow {
  Index n = 0;
  Index m = 0;
  int seed = 0;
  std::array<double, 4> metrics{};
  int iters = 0;
  double wall_ms = 0.0;
  // Estimated objective never increased along the trajectory. Not written to CSV.
  bool monotone = true;
  // "ok", "max_iter", "line_search_failure" or "error:<message>".
  std::string status = "ok";
};

struct StudyReport {
  std::vector<StudyRow> rows;  // sorted by (n, m, seed)
};

// The shared, read-only state of a study: truth, oracle and feature map.
struct StudySetup {
  KboConfig config;
  std::shared_ptr<const RffOracle> oracle;
  std::shared_ptr<const RffFeatureSource> features;
};

// The feature map is a function of (oracle.seed, oracle.features, sigma).
RffMap study_feature_map(const KboConfig& config);

// Builds the oracle, or loads it from `cache_path` when the snapshot there
// matches the configuration (and writes it there after a fresh build).
StudySetup prepare_study(const KboConfig& config, const std::string& cache_path = {});

// Seed streams. Run `seed` of every cell draws its data from
// data_seed(config, seed), nested across sample sizes, and its initial point
// from omega0_seed(config, n, m, seed).
std::uint64_t data_seed(const KboConfig& config, int seed);
std::uint64_t omega0_seed(const KboConfig& config, Index n, Index m, int seed);
std::string seed_policy_comment(const KboConfig& config);

StudyRow run_study_cell(const StudySetup& setup, Index n, Index m, int seed);

std::vector<std::pair<Index, Index>> diagonal_cells(const std::vector<Index>& grid);
std::vector<std::pair<Index, Index>> full_grid_cells(const std::vector<Index>& grid);

// Runs every cell for seeds 0..config.seeds-1 on `threads` workers (0 reads
// KBO_THREADS, falling back to the hardware concurrency). The report is
// independent of the worker count.
StudyReport run_generalization_study(const StudySetup& setup,
                                     const std::vector<std::pair<Index, Index>>& cells,
                                     int threads = 0);

int default_thread_count();

inline constexpr const char* kReportHeader =
    "n,m,seed,val_err,grad_err,final_grad_norm,min_grad_norm,iters,wall_ms,status";

void write_report_csv(const StudyReport& report, std::ostream& os, const std::string& comment = {});
StudyReport read_report_csv(std::istream& is);

struct CellSummary {
  Index n = 0;
  Index m = 0;
  int count = 0;  // runs with finite metrics
  std::array<double, 4> mean{};
  std::array<double, 4> ci95{};  // 1.96 * standard error
};

std::vector<CellSummary> summarize(const StudyReport& report);

// Log-log slope of the mean metric against n over the m = n cells.
SlopeFit diagonal_slope(const std::vector<CellSummary>& summary, Metric metric);

void write_heatmap_csv(const std::vector<CellSummary>& summary, std::ostream& os);

struct DiagonalCheck {
  int budgets = 0;
  int hits = 0;
  double fraction() const noexcept { return budgets ? static_cast<double>(hits) / budgets : 0.0; }
};

// On a square grid g_0 < ... < g_{k-1}, groups cells (g_i, g_j) into
// budgets i + j = const (constant n * m on a geometric grid) and counts the
// budgets whose smallest mean error sits at |i - j| <= 1. Budgets without
// any cell at |i - j| > 1 pass trivially and are left out.
DiagonalCheck heatmap_diagonal_check(const std::vector<CellSummary>& summary, Metric metric);

}  // namespace kbo
