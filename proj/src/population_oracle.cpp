#include "kbo/population_oracle.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "kbo/errors.hpp"
#include "kbo/linalg.hpp"

namespace kbo {

MemorySampleStream::MemorySampleStream(PointSet X, VectorXd s) : X_(std::move(X)), s_(std::move(s)) {
  if (X_.rows() != s_.size()) throw InputError("MemorySampleStream: one scalar per point");
}

void MemorySampleStream::read(Index start, Index count, PointSet& X, VectorXd& s) const {
  if (start < 0 || count < 0 || start + count > size()) throw InputError("MemorySampleStream: range out of bounds");
  X = X_.middleRows(start, count);
  s = s_.segment(start, count);
}

void RffOracle::finalize() {
  const Index D = XtX.rows();
  if (XtX.cols() != D || TtT.rows() != D || TtT.cols() != D || XtF.rows() != D || Tty.size() != D) {
    throw InputError("RffOracle: statistic shapes disagree");
  }
  if (!(meta.lambda > 0.0)) throw InputError("RffOracle: lambda must be positive");
  if (n_total == 0) {
    // No inner data: the inner minimizer is h = 0.
    J = MatrixXd::Zero(D, XtF.cols());
  } else {
    SpdSolver solver(XtX, static_cast<double>(n_total) * meta.lambda);
    J = solver.solve(XtF);
  }
  const MatrixXd TJ = TtT * J;
  Q.noalias() = J.transpose() * TJ;
  Q = 0.5 * (Q + Q.transpose()).eval();
  r.noalias() = J.transpose() * Tty;
}

namespace {

void check_stream(const SampleStream& s, const FeatureSource& f, const char* role) {
  if (s.size() > 0 && s.input_dim() != f.input_dim()) {
    throw InputError(std::string("build_oracle: ") + role + " stream dimension does not match the feature map");
  }
}

}  // namespace

RffOracle build_oracle(const FeatureSource& features, const SampleStream& inner,
                       const SampleStream& outer, const SineFeatureMap& phi, double lambda,
                       Index block_size, OracleMeta meta) {
  if (block_size < 1) throw InputError("build_oracle: block_size must be >= 1");
  if (!(lambda > 0.0)) throw InputError("build_oracle: lambda must be positive");
  if (outer.size() == 0) throw InputError("build_oracle: the outer stream is empty");
  check_stream(inner, features, "inner");
  check_stream(outer, features, "outer");

  const Index D = features.dim();
  const Index d = phi.dim();
  RffOracle o;
  o.XtX = MatrixXd::Zero(D, D);
  o.XtF = MatrixXd::Zero(D, d);
  o.TtT = MatrixXd::Zero(D, D);
  o.Tty = VectorXd::Zero(D);
  meta.lambda = lambda;
  meta.block_size = block_size;
  o.meta = meta;
  o.n_total = inner.size();
  o.m_total = outer.size();

  PointSet X;
  VectorXd s;
  for (Index start = 0; start < inner.size(); start += block_size) {
    const Index count = std::min(block_size, inner.size() - start);
    inner.read(start, count, X, s);
    const MatrixXd P = features.features(X);
    o.XtX.selfadjointView<Eigen::Lower>().rankUpdate(P.transpose());
    o.XtF.noalias() += P.transpose() * phi.matrix(s);
  }
  for (Index start = 0; start < outer.size(); start += block_size) {
    const Index count = std::min(block_size, outer.size() - start);
    outer.read(start, count, X, s);
    const MatrixXd P = features.features(X);
    o.TtT.selfadjointView<Eigen::Lower>().rankUpdate(P.transpose());
    o.Tty.noalias() += P.transpose() * s;
    o.y_norm_sq += s.squaredNorm();
  }
  o.XtX = o.XtX.selfadjointView<Eigen::Lower>();
  o.TtT = o.TtT.selfadjointView<Eigen::Lower>();
  o.finalize();
  return o;
}

double oracle_value(const RffOracle& oracle, const VectorXd& omega) {
  if (omega.size() != oracle.param_dim()) throw InputError("oracle_value: omega dimension mismatch");
  const double m = static_cast<double>(oracle.m_total);
  return (0.5 * omega.dot(oracle.Q * omega) - omega.dot(oracle.r) + 0.5 * oracle.y_norm_sq) / m;
}

VectorXd oracle_grad(const RffOracle& oracle, const VectorXd& omega) {
  if (omega.size() != oracle.param_dim()) throw InputError("oracle_grad: omega dimension mismatch");
  return (oracle.Q * omega - oracle.r) / static_cast<double>(oracle.m_total);
}

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'B', 'O', 'R', 'F', 'F', 'O', 'R'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InputError("load_oracle: truncated snapshot");
  return v;
}

void put_matrix(std::ofstream& os, const MatrixXd& A) {
  put<std::int64_t>(os, A.rows());
  put<std::int64_t>(os, A.cols());
  os.write(reinterpret_cast<const char*>(A.data()), static_cast<std::streamsize>(sizeof(double) * A.size()));
}

MatrixXd get_matrix(std::ifstream& is, Index rows, Index cols) {
  const auto r = get<std::int64_t>(is);
  const auto c = get<std::int64_t>(is);
  if (r != rows || c != cols) throw InputError("load_oracle: statistic shape does not match the header");
  MatrixXd A(rows, cols);
  is.read(reinterpret_cast<char*>(A.data()), static_cast<std::streamsize>(sizeof(double) * A.size()));
  if (!is) throw InputError("load_oracle: truncated snapshot");
  return A;
}

}  // namespace

void save_oracle(const RffOracle& o, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("save_oracle: cannot open " + path);
  os.write(kMagic.data(), kMagic.size());
  put(os, kVersion);
  put<std::int64_t>(os, o.features());
  put<std::int64_t>(os, o.param_dim());
  put(os, o.meta.lambda);
  put<std::int64_t>(os, o.n_total);
  put<std::int64_t>(os, o.m_total);
  put(os, o.meta.feature_seed);
  put(os, o.meta.data_seed);
  put(os, o.meta.bandwidth);
  put<std::int64_t>(os, o.meta.block_size);
  put(os, o.meta.model_digest);
  put_matrix(os, o.XtX);
  put_matrix(os, o.XtF);
  put_matrix(os, o.TtT);
  put_matrix(os, o.Tty);
  put(os, o.y_norm_sq);
  if (!os) throw InputError("save_oracle: write failed for " + path);
}

RffOracle load_oracle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("load_oracle: cannot open " + path);
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw InputError("load_oracle: not an oracle snapshot: " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw InputError("load_oracle: unsupported snapshot version " + std::to_string(version));
  RffOracle o;
  const auto D = get<std::int64_t>(is);
  const auto d = get<std::int64_t>(is);
  if (D < 1 || d < 1) throw InputError("load_oracle: invalid dimensions in header");
  o.meta.lambda = get<double>(is);
  o.n_total = get<std::int64_t>(is);
  o.m_total = get<std::int64_t>(is);
  o.meta.feature_seed = get<std::uint64_t>(is);
  o.meta.data_seed = get<std::uint64_t>(is);
  o.meta.bandwidth = get<double>(is);
  o.meta.block_size = get<std::int64_t>(is);
  o.meta.model_digest = get<std::uint64_t>(is);
  o.XtX = get_matrix(is, D, D);
  o.XtF = get_matrix(is, D, d);
  o.TtT = get_matrix(is, D, D);
  o.Tty = get_matrix(is, D, 1);
  o.y_norm_sq = get<double>(is);
  o.finalize();
  return o;
}

}  // namespace kbo
