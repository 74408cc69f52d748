#include "kbo/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "kbo/errors.hpp"
#include "kbo/rng.hpp"

namespace kbo {

namespace {

void require_dim(const KernelSpec& spec, Index dim, const char* what) {
  if (dim != spec.input_dim) {
    throw InputError(std::string(what) + ": point dimension " + std::to_string(dim) +
                     " does not match kernel input dimension " + std::to_string(spec.input_dim));
  }
}

}  // namespace

void KernelSpec::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InputError("kernel bandwidth must be positive and finite");
  }
  if (input_dim < 1) throw InputError("kernel input dimension must be at least 1");
}

double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const VectorXd>& x,
                   const Eigen::Ref<const VectorXd>& x2) {
  spec.validate();
  require_dim(spec, x.size(), "eval_kernel");
  require_dim(spec, x2.size(), "eval_kernel");
  const double sq = (x - x2).squaredNorm();
  return std::exp(-sq / (2.0 * spec.bandwidth * spec.bandwidth));
}

MatrixXd gram(const KernelSpec& spec, const PointSet& rows, const PointSet& cols) {
  spec.validate();
  if (rows.rows() == 0 || cols.rows() == 0) throw InputError("gram: empty point list");
  require_dim(spec, rows.cols(), "gram");
  require_dim(spec, cols.cols(), "gram");

  const double scale = -1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  const bool same = &rows == &cols;
  MatrixXd out(rows.rows(), cols.rows());
  for (Index j = 0; j < cols.rows(); ++j) {
    const Index i0 = same ? j : 0;
    for (Index i = i0; i < rows.rows(); ++i) {
      const double v = std::exp(scale * (rows.row(i) - cols.row(j)).squaredNorm());
      out(i, j) = v;
      if (same) out(j, i) = v;
    }
  }
  return out;
}

MatrixXd gram(const KernelSpec& spec, const PointSet& points) { return gram(spec, points, points); }

GramSet GramSet::build(const KernelSpec& spec, const PointSet& inner, const PointSet& outer) {
  GramSet g;
  g.K = gram(spec, inner);
  g.K_bar = gram(spec, outer, inner);
  g.K_tilde = gram(spec, outer);
  g.kappa = spec.bound();
  return g;
}

GramSet GramSet::from_features(const MatrixXd& inner_features, const MatrixXd& outer_features) {
  if (inner_features.rows() == 0 || outer_features.rows() == 0) {
    throw InputError("GramSet::from_features: empty feature matrix");
  }
  if (inner_features.cols() != outer_features.cols()) {
    throw InputError("GramSet::from_features: feature dimensions differ");
  }
  GramSet g;
  const Index n = inner_features.rows();
  const Index m = outer_features.rows();
  g.K = MatrixXd::Zero(n, n);
  g.K.selfadjointView<Eigen::Lower>().rankUpdate(inner_features);
  g.K.triangularView<Eigen::StrictlyUpper>() = g.K.transpose();
  g.K_bar.noalias() = outer_features * inner_features.transpose();
  g.K_tilde = MatrixXd::Zero(m, m);
  g.K_tilde.selfadjointView<Eigen::Lower>().rankUpdate(outer_features);
  g.K_tilde.triangularView<Eigen::StrictlyUpper>() = g.K_tilde.transpose();
  g.kappa = std::max(inner_features.rowwise().squaredNorm().maxCoeff(),
                     outer_features.rowwise().squaredNorm().maxCoeff());
  return g;
}

RffMap sample_rff(const KernelSpec& spec, Index num_features, std::uint64_t seed) {
  spec.validate();
  if (num_features < 1) throw InputError("sample_rff: feature count must be at least 1");
  RffMap map;
  map.bandwidth = spec.bandwidth;
  map.W.resize(num_features, spec.input_dim);
  map.b.resize(num_features);
  const double freq_scale = 1.0 / spec.bandwidth;
  for (Index k = 0; k < num_features; ++k) {
    Rng rng(seed, {static_cast<std::uint64_t>(k)});
    for (Index c = 0; c < spec.input_dim; ++c) map.W(k, c) = freq_scale * rng.normal();
    map.b(k) = 2.0 * std::numbers::pi * rng.uniform();
  }
  return map;
}

MatrixXd rff_features(const RffMap& map, const PointSet& X) {
  if (X.cols() != map.input_dim()) {
    throw InputError("rff_features: point dimension " + std::to_string(X.cols()) +
                     " does not match map input dimension " + std::to_string(map.input_dim()));
  }
  const double scale = std::sqrt(2.0 / static_cast<double>(map.features()));
  MatrixXd Z = X * map.W.transpose();
  Z.rowwise() += map.b.transpose();
  return scale * Z.array().cos().matrix();
}

}  // namespace kbo
