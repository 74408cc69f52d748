#include "kbo/losses.hpp"

#include <cmath>

#include "kbo/errors.hpp"

namespace kbo {

namespace {

double treatment_of(const Target& y, const char* who) {
  if (const auto* t = std::get_if<Treatment>(&y)) return t->value;
  throw InputError(std::string(who) + ": expected a treatment target");
}

double response_of(const Target& y, const char* who) {
  if (const auto* r = std::get_if<Response>(&y)) return r->value;
  throw InputError(std::string(who) + ": expected a response target");
}

}  // namespace

double target_value(const Target& y) noexcept {
  return std::visit([](const auto& v) { return v.value; }, y);
}

DerivativeRecord loss_bundle_eval(const LossBundle& bundle, const VectorXd& omega, double v,
                                  const Target& y) {
  if (omega.size() != bundle.param_dim()) {
    throw InputError(bundle.name() + ": omega has dimension " + std::to_string(omega.size()) +
                     ", expected " + std::to_string(bundle.param_dim()));
  }
  if (!omega.allFinite() || !std::isfinite(v) || !std::isfinite(target_value(y))) {
    throw NumericError(bundle.name() + ": non-finite input");
  }
  return bundle.eval(omega, v, y);
}

SineFeatureMap::SineFeatureMap(Index d) : d_(d) {
  if (d < 1) throw InputError("SineFeatureMap: dimension must be at least 1");
}

VectorXd SineFeatureMap::operator()(double t) const {
  VectorXd out(d_);
  for (Index l = 0; l < d_; ++l) out(l) = std::sin(t + static_cast<double>(l + 1));
  return out;
}

MatrixXd SineFeatureMap::matrix(std::span<const double> t) const {
  MatrixXd F(static_cast<Index>(t.size()), d_);
  for (Index i = 0; i < F.rows(); ++i) {
    for (Index l = 0; l < d_; ++l) F(i, l) = std::sin(t[i] + static_cast<double>(l + 1));
  }
  return F;
}

MatrixXd SineFeatureMap::matrix(const VectorXd& t) const {
  return matrix(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
}

DerivativeRecord IvInnerLoss::eval(const VectorXd& omega, double v, const Target& y) const {
  const VectorXd f = phi_(treatment_of(y, "iv_inner"));
  const double r = v - omega.dot(f);
  DerivativeRecord rec;
  rec.value = 0.5 * r * r;
  rec.d_omega = -r * f;
  rec.d_v = r;
  rec.d_vv = 1.0;
  rec.d_omega_v = -f;
  return rec;
}

double IvInnerLoss::value(const VectorXd& omega, double v, const Target& y) const {
  const double r = v - omega.dot(phi_(treatment_of(y, "iv_inner")));
  return 0.5 * r * r;
}

IvOuterLoss::IvOuterLoss(Index d, double ridge) : d_(d), ridge_(ridge) {
  if (d < 1) throw InputError("IvOuterLoss: dimension must be at least 1");
  if (!(ridge >= 0.0)) throw InputError("IvOuterLoss: ridge must be non-negative");
}

DerivativeRecord IvOuterLoss::eval(const VectorXd& omega, double v, const Target& y) const {
  const double r = v - response_of(y, "iv_outer");
  DerivativeRecord rec;
  rec.value = 0.5 * r * r + ridge_ * omega.squaredNorm();
  rec.d_omega = (2.0 * ridge_) * omega;
  if (ridge_ == 0.0) rec.d_omega.setZero();
  rec.d_v = r;
  rec.d_vv = 1.0;
  rec.d_omega_v = VectorXd::Zero(d_);
  return rec;
}

double IvOuterLoss::value(const VectorXd& omega, double v, const Target& y) const {
  const double r = v - response_of(y, "iv_outer");
  return 0.5 * r * r + ridge_ * omega.squaredNorm();
}

DerivativeRecord ShiftInnerLoss::eval(const VectorXd& omega, double v, const Target& y) const {
  const double r = v - response_of(y, "shift_inner");
  const double w = omega(0);
  DerivativeRecord rec;
  rec.value = 0.5 * w * r * r;
  rec.d_omega = VectorXd::Constant(1, 0.5 * r * r);
  rec.d_v = w * r;
  rec.d_vv = w;
  rec.d_omega_v = VectorXd::Constant(1, r);
  return rec;
}

DerivativeRecord ShiftOuterLoss::eval(const VectorXd& /*omega*/, double v, const Target& y) const {
  const double r = v - response_of(y, "shift_outer");
  DerivativeRecord rec;
  rec.value = 0.5 * r * r;
  rec.d_omega = VectorXd::Zero(1);
  rec.d_v = r;
  rec.d_vv = 1.0;
  rec.d_omega_v = VectorXd::Zero(1);
  return rec;
}

}  // namespace kbo
