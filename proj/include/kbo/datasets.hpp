#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "kbo/kernels.hpp"
#include "kbo/losses.hpp"
#include "kbo/population_oracle.hpp"

namespace kbo {

enum class InstrumentDist { Gaussian, StudentT };

struct IvDatasetConfig {
  std::uint64_t seed = 0;
  Index n = 100;
  Index m = 100;
  InstrumentDist instrument_dist = InstrumentDist::Gaussian;
  double nu = 2.5;
  Index p = 3;
  Index d = 4;
  double noise_std = 0.15811388300841897;  // sqrt(0.025)
  std::uint64_t truth_seed = 0;

  void validate() const;
};

// Stream roles; sample i of role r is drawn from its own derived RNG stream,
// so the first n samples of a larger draw coincide with an n-sample draw.
enum class SampleRole : std::uint64_t { Inner = 1, Outer = 2 };

// omega* ~ U(0, 1)^d.
VectorXd draw_truth(std::uint64_t truth_seed, Index d);

struct IvPoint {
  double t = 0.0;
  double y = 0.0;
};

// t = 2 (1^T x + eps), y = truth^T phi(t) + eps.
IvPoint iv_pushforward(const Eigen::Ref<const VectorXd>& x, double eps, const VectorXd& truth,
                       const SineFeatureMap& phi);

struct IvDataset {
  PointSet inner_x;   // n x p
  VectorXd inner_t;   // treatments
  PointSet outer_x;   // m x p
  VectorXd outer_y;   // responses
  VectorXd truth;
};

IvDataset generate_iv_data(const IvDatasetConfig& config);

// The same generative model exposed as a stream of `size` samples of one
// role, for the population oracle.
class IvSampleStream final : public SampleStream {
 public:
  IvSampleStream(IvDatasetConfig config, SampleRole role, Index size);

  Index size() const noexcept override { return size_; }
  Index input_dim() const noexcept override { return config_.p; }
  void read(Index start, Index count, PointSet& X, VectorXd& s) const override;

 private:
  IvDatasetConfig config_;
  SampleRole role_;
  Index size_;
  VectorXd truth_;
  SineFeatureMap phi_;
};

struct ShiftDataset {
  PointSet train_x;
  VectorXd train_y;
  PointSet test_x;
  VectorXd test_y;
};

ShiftDataset generate_shift_data(const HyperShiftProblem& problem, Index n, Index m,
                                 std::uint64_t seed);

}  // namespace kbo
