#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "kbo/kernels.hpp"
#include "kbo/losses.hpp"

namespace kbo {

// Maps a batch of input points (one per row) to feature rows.
class FeatureSource {
 public:
  virtual ~FeatureSource() = default;
  virtual Index dim() const noexcept = 0;
  virtual Index input_dim() const noexcept = 0;
  virtual MatrixXd features(const PointSet& X) const = 0;
};

class RffFeatureSource final : public FeatureSource {
 public:
  explicit RffFeatureSource(RffMap map) : map_(std::move(map)) {}

  Index dim() const noexcept override { return map_.features(); }
  Index input_dim() const noexcept override { return map_.input_dim(); }
  MatrixXd features(const PointSet& X) const override { return rff_features(map_, X); }
  const RffMap& map() const noexcept { return map_; }

 private:
  RffMap map_;
};

// A finite, deterministic sequence of (x, scalar) samples that can be read in
// arbitrary contiguous ranges. For inner streams the scalar is the treatment,
// for outer streams the response.
class SampleStream {
 public:
  virtual ~SampleStream() = default;
  virtual Index size() const noexcept = 0;
  virtual Index input_dim() const noexcept = 0;
  // Writes samples [start, start + count) into X (count x p) and s (count).
  virtual void read(Index start, Index count, PointSet& X, VectorXd& s) const = 0;
};

class MemorySampleStream final : public SampleStream {
 public:
  MemorySampleStream(PointSet X, VectorXd s);

  Index size() const noexcept override { return X_.rows(); }
  Index input_dim() const noexcept override { return X_.cols(); }
  void read(Index start, Index count, PointSet& X, VectorXd& s) const override;

 private:
  PointSet X_;
  VectorXd s_;
};

// Provenance stored alongside the statistics; compared on cache reuse.
struct OracleMeta {
  double lambda = 0.01;
  double bandwidth = 0.2;
  std::uint64_t feature_seed = 0;
  std::uint64_t data_seed = 0;
  Index block_size = 1000;
  // Digest of the remaining data-model settings (truth, noise, instrument law).
  std::uint64_t model_digest = 0;
};

// Feature statistics of a large inner sample (Xi, rows psi(x_i)) with
// treatments F (rows phi(t_i)) and an outer sample (Xi_t, y):
//   XtX = Xi^T Xi, XtF = Xi^T F, TtT = Xi_t^T Xi_t, Tty = Xi_t^T y, y_norm_sq = ||y||^2,
//   J = (XtX + n lambda I)^{-1} XtF.
// The inner solution at omega is h(x) = psi(x)^T J omega, so the outer
// risk is the quadratic
//   F(omega) = 1/(2m) omega^T Q omega - 1/m omega^T r + 1/(2m) ||y||^2
// with Q = J^T TtT J and r = J^T Tty.
struct RffOracle {
  MatrixXd XtX;
  MatrixXd XtF;
  MatrixXd TtT;
  VectorXd Tty;
  double y_norm_sq = 0.0;
  MatrixXd J;
  MatrixXd Q;
  VectorXd r;
  Index n_total = 0;
  Index m_total = 0;
  OracleMeta meta;

  Index features() const noexcept { return XtX.rows(); }
  Index param_dim() const noexcept { return XtF.cols(); }

  // Recomputes J, Q and r from the accumulated statistics.
  void finalize();
};

RffOracle build_oracle(const FeatureSource& features, const SampleStream& inner,
                       const SampleStream& outer, const SineFeatureMap& phi, double lambda,
                       Index block_size, OracleMeta meta = {});

double oracle_value(const RffOracle& oracle, const VectorXd& omega);
VectorXd oracle_grad(const RffOracle& oracle, const VectorXd& omega);

// Binary snapshot with a versioned header. load_oracle throws InputError on
// a malformed or truncated file.
void save_oracle(const RffOracle& oracle, const std::string& path);
RffOracle load_oracle(const std::string& path);

}  // namespace kbo
