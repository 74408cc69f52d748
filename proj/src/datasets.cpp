#include "kbo/datasets.hpp"

#include <cmath>

#include "kbo/errors.hpp"
#include "kbo/rng.hpp"

namespace kbo {

void IvDatasetConfig::validate() const {
  if (n < 0 || m < 0) throw ConfigError("dataset: sample counts must be non-negative");
  if (p < 1 || d < 1) throw ConfigError("dataset: dimensions must be positive");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("dataset: noise_std must be finite and >= 0");
  if (instrument_dist == InstrumentDist::StudentT && !(nu > 2.0)) {
    throw ConfigError("dataset: Student-t instruments need nu > 2");
  }
}

VectorXd draw_truth(std::uint64_t truth_seed, Index d) {
  Rng rng(truth_seed, {0x7472757468ULL});
  VectorXd w(d);
  for (Index l = 0; l < d; ++l) w(l) = rng.uniform();
  return w;
}

IvPoint iv_pushforward(const Eigen::Ref<const VectorXd>& x, double eps, const VectorXd& truth,
                       const SineFeatureMap& phi) {
  IvPoint out;
  out.t = 2.0 * (x.sum() + eps);
  out.y = truth.dot(phi(out.t)) + eps;
  return out;
}

namespace {

// Coordinates of x first, then the shared noise eps.
void draw_sample(const IvDatasetConfig& c, SampleRole role, Index i, Eigen::Ref<VectorXd> x,
                 double& eps) {
  Rng rng(c.seed, {static_cast<std::uint64_t>(role), static_cast<std::uint64_t>(i)});
  for (Index k = 0; k < c.p; ++k) {
    x(k) = c.instrument_dist == InstrumentDist::Gaussian ? rng.normal() : rng.student_t(c.nu);
  }
  eps = c.noise_std * rng.normal();
}

}  // namespace

IvDataset generate_iv_data(const IvDatasetConfig& config) {
  config.validate();
  IvDataset ds;
  ds.truth = draw_truth(config.truth_seed, config.d);
  const SineFeatureMap phi(config.d);
  ds.inner_x.resize(config.n, config.p);
  ds.inner_t.resize(config.n);
  ds.outer_x.resize(config.m, config.p);
  ds.outer_y.resize(config.m);
  VectorXd x(config.p);
  double eps = 0.0;
  for (Index i = 0; i < config.n; ++i) {
    draw_sample(config, SampleRole::Inner, i, x, eps);
    ds.inner_x.row(i) = x.transpose();
    ds.inner_t(i) = iv_pushforward(x, eps, ds.truth, phi).t;
  }
  for (Index j = 0; j < config.m; ++j) {
    draw_sample(config, SampleRole::Outer, j, x, eps);
    ds.outer_x.row(j) = x.transpose();
    ds.outer_y(j) = iv_pushforward(x, eps, ds.truth, phi).y;
  }
  return ds;
}

IvSampleStream::IvSampleStream(IvDatasetConfig config, SampleRole role, Index size)
    : config_(config), role_(role), size_(size), phi_(config.d) {
  config_.validate();
  if (size < 0) throw InputError("IvSampleStream: negative size");
  truth_ = draw_truth(config_.truth_seed, config_.d);
}

void IvSampleStream::read(Index start, Index count, PointSet& X, VectorXd& s) const {
  if (start < 0 || count < 0 || start + count > size_) throw InputError("IvSampleStream: range out of bounds");
  X.resize(count, config_.p);
  s.resize(count);
  VectorXd x(config_.p);
  double eps = 0.0;
  for (Index k = 0; k < count; ++k) {
    draw_sample(config_, role_, start + k, x, eps);
    X.row(k) = x.transpose();
    const IvPoint pt = iv_pushforward(x, eps, truth_, phi_);
    s(k) = role_ == SampleRole::Inner ? pt.t : pt.y;
  }
}

ShiftDataset generate_shift_data(const HyperShiftProblem& problem, Index n, Index m,
                                 std::uint64_t seed) {
  if (n < 1 || m < 1) throw InputError("generate_shift_data: sample counts must be positive");
  const Index p = problem.input_dim;
  ShiftDataset ds;
  ds.train_x.resize(n, p);
  ds.train_y.resize(n);
  ds.test_x.resize(m, p);
  ds.test_y.resize(m);
  auto fill = [&](PointSet& X, VectorXd& y, SampleRole role, double offset) {
    for (Index i = 0; i < X.rows(); ++i) {
      Rng rng(seed, {static_cast<std::uint64_t>(role), static_cast<std::uint64_t>(i)});
      for (Index k = 0; k < p; ++k) X(i, k) = offset + rng.normal();
      y(i) = std::sin(2.0 * X.row(i).sum()) + problem.noise_std * rng.normal();
    }
  };
  fill(ds.train_x, ds.train_y, SampleRole::Inner, 0.0);
  fill(ds.test_x, ds.test_y, SampleRole::Outer, problem.shift);
  return ds;
}

}  // namespace kbo
