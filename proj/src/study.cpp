#include "kbo/study.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "kbo/datasets.hpp"
#include "kbo/errors.hpp"
#include "kbo/iv_closed_form.hpp"
#include "kbo/optimizer.hpp"
#include "kbo/rng.hpp"

namespace kbo {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagData = 0x64617461ULL;
constexpr std::uint64_t kTagOmega0 = 0x6f6d656761ULL;
constexpr std::uint64_t kTagOracleData = 0x6f64617461ULL;
constexpr std::uint64_t kTagFeatures = 0x726666ULL;

std::uint64_t oracle_data_seed(const KboConfig& c) { return derive_seed(c.oracle_seed, {kTagOracleData}); }
std::uint64_t feature_seed(const KboConfig& c) { return derive_seed(c.oracle_seed, {kTagFeatures}); }

std::uint64_t model_digest(const KboConfig& c) {
  return derive_seed(c.truth_seed,
                     {static_cast<std::uint64_t>(c.p), static_cast<std::uint64_t>(c.d),
                      static_cast<std::uint64_t>(c.instrument_dist), std::bit_cast<std::uint64_t>(c.nu),
                      std::bit_cast<std::uint64_t>(c.noise_std)});
}

OracleMeta expected_meta(const KboConfig& c) {
  OracleMeta meta;
  meta.lambda = c.lambda;
  meta.bandwidth = c.sigma;
  meta.feature_seed = feature_seed(c);
  meta.data_seed = oracle_data_seed(c);
  meta.block_size = c.oracle_block_size;
  meta.model_digest = model_digest(c);
  return meta;
}

bool snapshot_matches(const RffOracle& o, const KboConfig& c) {
  const OracleMeta want = expected_meta(c);
  return o.features() == c.oracle_features && o.param_dim() == c.d && o.n_total == c.oracle_samples &&
         o.m_total == c.oracle_samples && o.meta.lambda == want.lambda &&
         o.meta.bandwidth == want.bandwidth && o.meta.feature_seed == want.feature_seed &&
         o.meta.data_seed == want.data_seed && o.meta.block_size == want.block_size &&
         o.meta.model_digest == want.model_digest;
}

std::string sanitize(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

}  // namespace

Metric metric_from_name(const std::string& name) {
  for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
    if (name == kMetricNames[k]) return static_cast<Metric>(k);
  }
  throw InputError("unknown metric '" + name + "' (expected val_err, grad_err, final_grad_norm or min_grad_norm)");
}

RffMap study_feature_map(const KboConfig& config) {
  return sample_rff(config.kernel(), config.oracle_features, feature_seed(config));
}

StudySetup prepare_study(const KboConfig& config, const std::string& cache_path) {
  config.validate();
  if (config.instance != ProblemInstance::Iv) {
    throw ConfigError("study: the generalization study is defined for the IV instance only");
  }
  StudySetup setup;
  setup.config = config;
  setup.features = std::make_shared<RffFeatureSource>(study_feature_map(config));

  if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
    RffOracle cached = load_oracle(cache_path);
    if (snapshot_matches(cached, config)) {
      setup.oracle = std::make_shared<RffOracle>(std::move(cached));
      return setup;
    }
  }
  const IvDatasetConfig data = config.dataset(oracle_data_seed(config), 0, 0);
  const IvSampleStream inner(data, SampleRole::Inner, config.oracle_samples);
  const IvSampleStream outer(data, SampleRole::Outer, config.oracle_samples);
  RffOracle oracle = build_oracle(*setup.features, inner, outer, SineFeatureMap(config.d), config.lambda,
                                  config.oracle_block_size, expected_meta(config));
  if (!cache_path.empty()) save_oracle(oracle, cache_path);
  setup.oracle = std::make_shared<RffOracle>(std::move(oracle));
  return setup;
}

std::uint64_t data_seed(const KboConfig& config, int seed) {
  return derive_seed(config.seed, {kTagData, static_cast<std::uint64_t>(seed)});
}

std::uint64_t omega0_seed(const KboConfig& config, Index n, Index m, int seed) {
  return derive_seed(config.seed, {kTagOmega0, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(m),
                                   static_cast<std::uint64_t>(seed)});
}

std::string seed_policy_comment(const KboConfig& c) {
  std::ostringstream os;
  os << "# seed policy: truth (data.truth_seed=" << c.truth_seed << ") and oracle (oracle.seed=" << c.oracle_seed
     << ") fixed for all runs; run s of every cell draws its inner/outer sample from stream (seed=" << c.seed
     << " s) with nested indices and a fresh omega0 ~ U(0 1)^d per (n m s); estimator kernel="
     << (c.estimator_kernel == EstimatorKernel::Rff ? "rff" : "exact");
  return os.str();
}

StudyRow run_study_cell(const StudySetup& setup, Index n, Index m, int seed) {
  const auto start = std::chrono::steady_clock::now();
  const KboConfig& c = setup.config;
  const RffOracle& oracle = *setup.oracle;
  StudyRow row;
  row.n = n;
  row.m = m;
  row.seed = seed;
  try {
    const IvDataset ds = generate_iv_data(c.dataset(data_seed(c, seed), n, m));
    const GramSet gram = c.estimator_kernel == EstimatorKernel::Rff
                             ? GramSet::from_features(setup.features->features(ds.inner_x),
                                                      setup.features->features(ds.outer_x))
                             : GramSet::build(c.kernel(), ds.inner_x, ds.outer_x);
    const SineFeatureMap phi(c.d);
    const IvClosedForm estimator(gram, phi.matrix(ds.inner_t), ds.outer_y, c.lambda, c.ridge);

    auto pop_value = [&](const VectorXd& w) { return oracle_value(oracle, w) + c.ridge * w.squaredNorm(); };
    auto pop_grad = [&](const VectorXd& w) -> VectorXd { return oracle_grad(oracle, w) + 2.0 * c.ridge * w; };

    Rng rng(omega0_seed(c, n, m, seed));
    VectorXd omega0(c.d);
    for (Index l = 0; l < c.d; ++l) omega0(l) = rng.uniform();

    row.metrics[0] = std::abs(pop_value(omega0) - estimator.value(omega0));
    row.metrics[1] = (pop_grad(omega0) - estimator.grad(omega0)).norm();

    GdOptions opts;
    opts.tol = c.tol;
    opts.max_iter = c.max_iter;
    const Trajectory traj = gd_run(
        omega0, [&](const VectorXd& w) { return estimator.grad(w); },
        [&](const VectorXd& w) { return estimator.value(w); }, opts);

    double min_norm = std::numeric_limits<double>::infinity();
    for (const auto& pt : traj.points) min_norm = std::min(min_norm, pop_grad(pt.omega).norm());
    row.metrics[2] = pop_grad(traj.final_point().omega).norm();
    row.metrics[3] = min_norm;
    row.iters = traj.iterations();
    for (std::size_t i = 1; i < traj.points.size(); ++i) row.monotone = row.monotone && traj.points[i].value <= traj.points[i - 1].value;
    row.status = traj.termination == Termination::Tolerance ? "ok" : to_string(traj.termination);
  } catch (const std::exception& e) {
    row.metrics.fill(std::numeric_limits<double>::quiet_NaN());
    row.status = "error:" + sanitize(e.what());
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::vector<std::pair<Index, Index>> diagonal_cells(const std::vector<Index>& grid) {
  std::vector<std::pair<Index, Index>> cells;
  for (Index g : grid) cells.emplace_back(g, g);
  return cells;
}

std::vector<std::pair<Index, Index>> full_grid_cells(const std::vector<Index>& grid) {
  std::vector<std::pair<Index, Index>> cells;
  for (Index a : grid) {
    for (Index b : grid) cells.emplace_back(a, b);
  }
  return cells;
}

int default_thread_count() {
  if (const char* env = std::getenv("KBO_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

StudyReport run_generalization_study(const StudySetup& setup,
                                     const std::vector<std::pair<Index, Index>>& cells, int threads) {
  if (!setup.oracle || !setup.features) throw InputError("study: setup has no oracle");
  std::vector<std::pair<Index, Index>> sorted = cells;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  const int seeds = setup.config.seeds;
  const std::size_t total = sorted.size() * static_cast<std::size_t>(seeds);
  StudyReport report;
  report.rows.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const auto& [n, m] = sorted[k / seeds];
      report.rows[k] = run_study_cell(setup, n, m, static_cast<int>(k % seeds));
    }
  };
  if (threads <= 0) threads = default_thread_count();
  threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), std::max<std::size_t>(total, 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

void write_report_csv(const StudyReport& report, std::ostream& os, const std::string& comment) {
  if (!comment.empty()) os << comment << '\n';
  os << kReportHeader << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : report.rows) {
    os << r.n << ',' << r.m << ',' << r.seed;
    for (double v : r.metrics) os << ',' << num(v);
    os << ',' << r.iters << ',' << num(r.wall_ms) << ',' << r.status << '\n';
  }
}

StudyReport read_report_csv(std::istream& is) {
  StudyReport report;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kReportHeader) throw InputError("report: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw InputError("report: expected 10 fields in '" + line + "'");
    StudyRow r;
    try {
      r.n = std::stoll(f[0]);
      r.m = std::stoll(f[1]);
      r.seed = std::stoi(f[2]);
      for (int k = 0; k < 4; ++k) r.metrics[k] = std::strtod(f[3 + k].c_str(), nullptr);
      r.iters = std::stoi(f[7]);
      r.wall_ms = std::stod(f[8]);
    } catch (const std::logic_error&) {
      throw InputError("report: malformed row '" + line + "'");
    }
    r.status = f[9];
    report.rows.push_back(std::move(r));
  }
  if (!header_seen) throw InputError("report: missing header");
  return report;
}

std::vector<CellSummary> summarize(const StudyReport& report) {
  std::map<std::pair<Index, Index>, std::vector<const StudyRow*>> groups;
  for (const auto& r : report.rows) groups[{r.n, r.m}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, rows] : groups) {
    CellSummary s;
    s.n = key.first;
    s.m = key.second;
    for (int k = 0; k < 4; ++k) {
      double sum = 0.0, sum_sq = 0.0;
      int count = 0;
      for (const StudyRow* r : rows) {
        const double v = r->metrics[k];
        if (!std::isfinite(v)) continue;
        sum += v;
        sum_sq += v * v;
        ++count;
      }
      s.count = k == 0 ? count : std::min(s.count, count);
      if (count == 0) {
        s.mean[k] = s.ci95[k] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const double mean = sum / count;
      s.mean[k] = mean;
      const double var = count > 1 ? std::max(0.0, (sum_sq - count * mean * mean) / (count - 1)) : 0.0;
      s.ci95[k] = 1.96 * std::sqrt(var / count);
    }
    out.push_back(s);
  }
  return out;
}

SlopeFit diagonal_slope(const std::vector<CellSummary>& summary, Metric metric) {
  std::vector<double> ns, errs;
  for (const auto& s : summary) {
    if (s.n != s.m) continue;
    ns.push_back(static_cast<double>(s.n));
    errs.push_back(s.mean[static_cast<int>(metric)]);
  }
  return fit_loglog(ns, errs);
}

void write_heatmap_csv(const std::vector<CellSummary>& summary, std::ostream& os) {
  os << "n,m,runs";
  for (const char* name : kMetricNames) os << ',' << name << "_mean," << name << "_ci95";
  os << '\n';
  char buf[64];
  for (const auto& s : summary) {
    os << s.n << ',' << s.m << ',' << s.count;
    for (int k = 0; k < 4; ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", s.mean[k], s.ci95[k]);
      os << buf;
    }
    os << '\n';
  }
}

DiagonalCheck heatmap_diagonal_check(const std::vector<CellSummary>& summary, Metric metric) {
  std::vector<Index> levels;
  for (const auto& s : summary) {
    levels.push_back(s.n);
    levels.push_back(s.m);
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  auto index_of = [&](Index v) { return std::lower_bound(levels.begin(), levels.end(), v) - levels.begin(); };

  struct Best {
    double err = std::numeric_limits<double>::infinity();
    long offset = 0;
    bool has_far_cell = false;
  };
  std::map<long, Best> budgets;
  for (const auto& s : summary) {
    const long i = index_of(s.n);
    const long j = index_of(s.m);
    const double e = s.mean[static_cast<int>(metric)];
    Best& b = budgets[i + j];
    if (std::abs(i - j) > 1) b.has_far_cell = true;
    if (std::isfinite(e) && e < b.err) {
      b.err = e;
      b.offset = std::abs(i - j);
    }
  }
  DiagonalCheck check;
  for (const auto& [budget, b] : budgets) {
    if (!b.has_far_cell || !std::isfinite(b.err)) continue;
    ++check.budgets;
    if (b.offset <= 1) ++check.hits;
  }
  return check;
}

}  // namespace kbo
