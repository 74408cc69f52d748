#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kbo/datasets.hpp"
#include "kbo/kernels.hpp"

namespace kbo {

enum class ProblemInstance { Iv, Shift };
enum class EstimatorKernel { Rff, Exact };

// Typed view of a flat `key = value` file. Blank lines and text after '#'
// are ignored; unknown or repeated keys and malformed values raise ConfigError.
//
//   seed                    master seed for per-run streams (data draws, omega0)
//   kernel.sigma            Gaussian bandwidth
//   lambda                  inner regularization
//   problem.instance        iv | shift
//   problem.p, problem.d    input and parameter dimensions
//   problem.n, problem.m    sample sizes for solve / grad-check / equiv-check
//   problem.ridge           outer penalty c ||omega||^2 (IV only)
//   data.instrument_dist    gaussian | student_t
//   data.nu                 Student-t degrees of freedom (> 2)
//   data.noise_std          standard deviation of the shared noise
//   data.truth_seed         fixes omega*
//   study.grid              comma-separated sample sizes
//   study.seeds             runs per grid cell
//   study.estimator_kernel  rff (the oracle's feature kernel) | exact
//   oracle.samples          inner and outer oracle sample count each
//   oracle.features         random feature count
//   oracle.block_size       accumulation block size
//   oracle.seed             fixes the oracle sample and the feature map
//   optimizer.tol           stop when the gradient norm is below this
//   optimizer.max_iter      iteration cap
struct KboConfig {
  std::uint64_t seed = 0;
  double sigma = 0.2;
  double lambda = 0.01;
  ProblemInstance instance = ProblemInstance::Iv;
  Index p = 3;
  Index d = 4;
  Index n = 200;
  Index m = 200;
  double ridge = 0.0;
  InstrumentDist instrument_dist = InstrumentDist::Gaussian;
  double nu = 2.5;
  double noise_std = 0.15811388300841897;
  std::uint64_t truth_seed = 0;
  std::vector<Index> grid{100, 200, 400, 800, 1600};
  int seeds = 10;
  EstimatorKernel estimator_kernel = EstimatorKernel::Rff;
  Index oracle_samples = 100000;
  Index oracle_features = 2048;
  Index oracle_block_size = 1000;
  std::uint64_t oracle_seed = 1;
  double tol = 1e-5;
  int max_iter = 10000;

  void validate() const;
  KernelSpec kernel() const;
  // Dataset settings for the (n, m) draw of one seed stream.
  IvDatasetConfig dataset(std::uint64_t data_seed, Index n, Index m) const;
};

KboConfig parse_config(std::istream& in);
KboConfig parse_config_string(const std::string& text);
KboConfig load_config(const std::string& path);

// key = value lines that parse back to `config`.
std::string format_config(const KboConfig& config);

}  // namespace kbo
