#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace kbo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Point sets are stored one point per row.
using PointSet = MatrixXd;

enum class KernelKind { Gaussian };

struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  double bandwidth = 0.2;
  Index input_dim = 3;

  void validate() const;
  // sup_x K(x, x).
  double bound() const noexcept { return 1.0; }
};

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const VectorXd>& x,
                   const Eigen::Ref<const VectorXd>& x2);

// Entry (i, j) = K(rows_i, cols_j). Exactly symmetric when rows and cols are
// the same object.
MatrixXd gram(const KernelSpec& spec, const PointSet& rows, const PointSet& cols);
MatrixXd gram(const KernelSpec& spec, const PointSet& points);

// Kernel matrices of the empirical bilevel problem: K over the inner points,
// K_bar between outer and inner points, K_tilde over the outer points.
struct GramSet {
  MatrixXd K;
  MatrixXd K_bar;
  MatrixXd K_tilde;
  double kappa = 1.0;

  Index n() const noexcept { return K.rows(); }
  Index m() const noexcept { return K_bar.rows(); }

  static GramSet build(const KernelSpec& spec, const PointSet& inner, const PointSet& outer);
  // Gram matrices of the kernel k(x, x') = psi(x)^T psi(x') given feature rows.
  static GramSet from_features(const MatrixXd& inner_features, const MatrixXd& outer_features);
};

// psi(x) = sqrt(2/D) cos(W x + b).
struct RffMap {
  MatrixXd W;  // D x p
  VectorXd b;  // D
  double bandwidth = 0.2;

  Index features() const noexcept { return W.rows(); }
  Index input_dim() const noexcept { return W.cols(); }
};

// Deterministic in (spec, D, seed). Row k of W and b_k come from the stream
// derive_seed(seed, {k}), so a map with more features extends a smaller one.
RffMap sample_rff(const KernelSpec& spec, Index num_features, std::uint64_t seed);

// |X| x D matrix whose row i is psi(X_i).
MatrixXd rff_features(const RffMap& map, const PointSet& X);

}  // namespace kbo
