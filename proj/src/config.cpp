#include "kbo/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "kbo/errors.hpp"

namespace kbo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config: key '" + key + "' expects " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite real number");
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::vector<Index> to_list(const std::string& key, const std::string& v) {
  std::vector<Index> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma-separated list of integers");
  return out;
}

using Setter = std::function<void(KboConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](KboConfig& c, const std::string& k, const std::string& v) { c.seed = to_seed(k, v); }},
      {"kernel.sigma", [](KboConfig& c, const std::string& k, const std::string& v) { c.sigma = to_double(k, v); }},
      {"lambda", [](KboConfig& c, const std::string& k, const std::string& v) { c.lambda = to_double(k, v); }},
      {"problem.instance",
       [](KboConfig& c, const std::string& k, const std::string& v) {
         if (v == "iv") c.instance = ProblemInstance::Iv;
         else if (v == "shift") c.instance = ProblemInstance::Shift;
         else bad_value(k, v, "iv or shift");
       }},
      {"problem.p", [](KboConfig& c, const std::string& k, const std::string& v) { c.p = to_int(k, v); }},
      {"problem.d", [](KboConfig& c, const std::string& k, const std::string& v) { c.d = to_int(k, v); }},
      {"problem.n", [](KboConfig& c, const std::string& k, const std::string& v) { c.n = to_int(k, v); }},
      {"problem.m", [](KboConfig& c, const std::string& k, const std::string& v) { c.m = to_int(k, v); }},
      {"problem.ridge", [](KboConfig& c, const std::string& k, const std::string& v) { c.ridge = to_double(k, v); }},
      {"data.instrument_dist",
       [](KboConfig& c, const std::string& k, const std::string& v) {
         if (v == "gaussian") c.instrument_dist = InstrumentDist::Gaussian;
         else if (v == "student_t") c.instrument_dist = InstrumentDist::StudentT;
         else bad_value(k, v, "gaussian or student_t");
       }},
      {"data.nu", [](KboConfig& c, const std::string& k, const std::string& v) { c.nu = to_double(k, v); }},
      {"data.noise_std", [](KboConfig& c, const std::string& k, const std::string& v) { c.noise_std = to_double(k, v); }},
      {"data.truth_seed", [](KboConfig& c, const std::string& k, const std::string& v) { c.truth_seed = to_seed(k, v); }},
      {"study.grid", [](KboConfig& c, const std::string& k, const std::string& v) { c.grid = to_list(k, v); }},
      {"study.seeds", [](KboConfig& c, const std::string& k, const std::string& v) { c.seeds = static_cast<int>(to_int(k, v)); }},
      {"study.estimator_kernel",
       [](KboConfig& c, const std::string& k, const std::string& v) {
         if (v == "rff") c.estimator_kernel = EstimatorKernel::Rff;
         else if (v == "exact") c.estimator_kernel = EstimatorKernel::Exact;
         else bad_value(k, v, "rff or exact");
       }},
      {"oracle.samples", [](KboConfig& c, const std::string& k, const std::string& v) { c.oracle_samples = to_int(k, v); }},
      {"oracle.features", [](KboConfig& c, const std::string& k, const std::string& v) { c.oracle_features = to_int(k, v); }},
      {"oracle.block_size", [](KboConfig& c, const std::string& k, const std::string& v) { c.oracle_block_size = to_int(k, v); }},
      {"oracle.seed", [](KboConfig& c, const std::string& k, const std::string& v) { c.oracle_seed = to_seed(k, v); }},
      {"optimizer.tol", [](KboConfig& c, const std::string& k, const std::string& v) { c.tol = to_double(k, v); }},
      {"optimizer.max_iter", [](KboConfig& c, const std::string& k, const std::string& v) { c.max_iter = static_cast<int>(to_int(k, v)); }},
  };
  return table;
}

}  // namespace

void KboConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("config: kernel.sigma must be positive");
  if (!(lambda > 0.0)) throw ConfigError("config: lambda must be positive");
  if (p < 1 || d < 1) throw ConfigError("config: problem.p and problem.d must be >= 1");
  if (n < 1 || m < 1) throw ConfigError("config: problem.n and problem.m must be >= 1");
  if (ridge < 0.0) throw ConfigError("config: problem.ridge must be >= 0");
  if (instance == ProblemInstance::Shift && d != 1) {
    throw ConfigError("config: the shift instance has a scalar parameter; set problem.d = 1");
  }
  if (instrument_dist == InstrumentDist::StudentT && !(nu > 2.0)) throw ConfigError("config: data.nu must exceed 2");
  if (!(noise_std >= 0.0)) throw ConfigError("config: data.noise_std must be >= 0");
  for (Index g : grid) {
    if (g < 1) throw ConfigError("config: study.grid entries must be >= 1");
  }
  if (seeds < 1) throw ConfigError("config: study.seeds must be >= 1");
  if (oracle_samples < 1) throw ConfigError("config: oracle.samples must be >= 1");
  if (oracle_features < 1) throw ConfigError("config: oracle.features must be >= 1");
  if (oracle_block_size < 1) throw ConfigError("config: oracle.block_size must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("config: optimizer.tol must be positive");
  if (max_iter < 0) throw ConfigError("config: optimizer.max_iter must be >= 0");
}

KernelSpec KboConfig::kernel() const {
  KernelSpec spec;
  spec.bandwidth = sigma;
  spec.input_dim = p;
  return spec;
}

IvDatasetConfig KboConfig::dataset(std::uint64_t data_seed, Index n_, Index m_) const {
  IvDatasetConfig c;
  c.seed = data_seed;
  c.n = n_;
  c.m = m_;
  c.instrument_dist = instrument_dist;
  c.nu = nu;
  c.p = p;
  c.d = d;
  c.noise_std = noise_std;
  c.truth_seed = truth_seed;
  return c;
}

KboConfig parse_config(std::istream& in) {
  KboConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not of the form key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("config: unknown key '" + key + "' on line " + std::to_string(lineno));
    if (!seen.insert(key).second) throw ConfigError("config: key '" + key + "' given twice");
    if (value.empty()) throw ConfigError("config: key '" + key + "' has no value");
    it->second(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

KboConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

KboConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_config(in);
}

std::string format_config(const KboConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "seed = " << c.seed << '\n'
     << "kernel.sigma = " << c.sigma << '\n'
     << "lambda = " << c.lambda << '\n'
     << "problem.instance = " << (c.instance == ProblemInstance::Iv ? "iv" : "shift") << '\n'
     << "problem.p = " << c.p << '\n'
     << "problem.d = " << c.d << '\n'
     << "problem.n = " << c.n << '\n'
     << "problem.m = " << c.m << '\n'
     << "problem.ridge = " << c.ridge << '\n'
     << "data.instrument_dist = " << (c.instrument_dist == InstrumentDist::Gaussian ? "gaussian" : "student_t") << '\n'
     << "data.nu = " << c.nu << '\n'
     << "data.noise_std = " << c.noise_std << '\n'
     << "data.truth_seed = " << c.truth_seed << '\n'
     << "study.grid = ";
  for (std::size_t i = 0; i < c.grid.size(); ++i) os << (i ? "," : "") << c.grid[i];
  os << '\n'
     << "study.seeds = " << c.seeds << '\n'
     << "study.estimator_kernel = " << (c.estimator_kernel == EstimatorKernel::Rff ? "rff" : "exact") << '\n'
     << "oracle.samples = " << c.oracle_samples << '\n'
     << "oracle.features = " << c.oracle_features << '\n'
     << "oracle.block_size = " << c.oracle_block_size << '\n'
     << "oracle.seed = " << c.oracle_seed << '\n'
     << "optimizer.tol = " << c.tol << '\n'
     << "optimizer.max_iter = " << c.max_iter << '\n';
  return os.str();
}

}  // namespace kbo
