#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace kbo {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Point-wise targets are tagged so that one bundle interface serves both
// levels: the IV inner loss consumes a treatment, every other loss a response.
struct Treatment {
  double value = 0.0;
};
struct Response {
  double value = 0.0;
};
using Target = std::variant<Treatment, Response>;

double target_value(const Target& y) noexcept;

// Everything the value and gradient estimators need from a point-wise loss
// l(omega, v, y), evaluated in one call.
struct DerivativeRecord {
  double value = 0.0;
  VectorXd d_omega;    // dl/domega
  double d_v = 0.0;    // dl/dv
  double d_vv = 0.0;   // d2l/dv2
  VectorXd d_omega_v;  // d2l/(domega dv)
};

class LossBundle {
 public:
  virtual ~LossBundle() = default;

  virtual Index param_dim() const noexcept = 0;
  virtual bool convex_in_v() const noexcept = 0;
  virtual bool quadratic_in_v() const noexcept = 0;
  virtual std::string name() const = 0;

  // Unchecked evaluation; see loss_bundle_eval for the validated entry point.
  virtual DerivativeRecord eval(const VectorXd& omega, double v, const Target& y) const = 0;

  // Only the value; defaults to eval().value.
  virtual double value(const VectorXd& omega, double v, const Target& y) const {
    return eval(omega, v, y).value;
  }
};

// Validates shapes, finiteness and the target tag, then evaluates.
DerivativeRecord loss_bundle_eval(const LossBundle& bundle, const VectorXd& omega, double v,
                                  const Target& y);

// phi(t) = (sin(t + 1), ..., sin(t + d)).
class SineFeatureMap {
 public:
  explicit SineFeatureMap(Index d);

  Index dim() const noexcept { return d_; }
  VectorXd operator()(double t) const;
  // Rows phi(t_i)^T.
  MatrixXd matrix(std::span<const double> t) const;
  MatrixXd matrix(const VectorXd& t) const;

 private:
  Index d_;
};

// l_in(omega, v, t) = 1/2 (v - omega^T phi(t))^2.
class IvInnerLoss final : public LossBundle {
 public:
  explicit IvInnerLoss(SineFeatureMap phi) : phi_(phi) {}

  Index param_dim() const noexcept override { return phi_.dim(); }
  bool convex_in_v() const noexcept override { return true; }
  bool quadratic_in_v() const noexcept override { return true; }
  std::string name() const override { return "iv_inner"; }
  DerivativeRecord eval(const VectorXd& omega, double v, const Target& y) const override;
  double value(const VectorXd& omega, double v, const Target& y) const override;

  const SineFeatureMap& feature_map() const noexcept { return phi_; }

 private:
  SineFeatureMap phi_;
};

// l_out(omega, v, y) = 1/2 (v - y)^2 + c ||omega||^2. With c > 0 the outer
// objective is coercive in omega; c = 0 is the plain IV outer loss.
class IvOuterLoss final : public LossBundle {
 public:
  explicit IvOuterLoss(Index d, double ridge = 0.0);

  Index param_dim() const noexcept override { return d_; }
  bool convex_in_v() const noexcept override { return true; }
  bool quadratic_in_v() const noexcept override { return true; }
  std::string name() const override { return "iv_outer"; }
  DerivativeRecord eval(const VectorXd& omega, double v, const Target& y) const override;
  double value(const VectorXd& omega, double v, const Target& y) const override;

  double ridge() const noexcept { return ridge_; }

 private:
  Index d_;
  double ridge_;
};

// Hyperparameter selection under distribution shift, omega = (weight):
// l_in(omega, v, y) = omega/2 (v - y)^2. Convex in v for omega >= 0, which the
// outer optimizer maintains by projection.
class ShiftInnerLoss final : public LossBundle {
 public:
  Index param_dim() const noexcept override { return 1; }
  bool convex_in_v() const noexcept override { return true; }
  bool quadratic_in_v() const noexcept override { return true; }
  std::string name() const override { return "shift_inner"; }
  DerivativeRecord eval(const VectorXd& omega, double v, const Target& y) const override;
};

// l_out(omega, v, y) = 1/2 (v - y)^2 on the shifted test distribution.
class ShiftOuterLoss final : public LossBundle {
 public:
  Index param_dim() const noexcept override { return 1; }
  bool convex_in_v() const noexcept override { return true; }
  bool quadratic_in_v() const noexcept override { return true; }
  std::string name() const override { return "shift_outer"; }
  DerivativeRecord eval(const VectorXd& omega, double v, const Target& y) const override;
};

// Instrumental variable regression with f_omega(t) = omega^T phi(t).
struct IvProblem {
  SineFeatureMap phi{4};
  VectorXd truth;  // omega*
  Index input_dim = 3;
  double noise_std = 0.15811388300841897;  // sqrt(0.025)

  IvInnerLoss inner_loss() const { return IvInnerLoss(phi); }
  IvOuterLoss outer_loss(double ridge = 0.0) const { return IvOuterLoss(phi.dim(), ridge); }
};

// Train inputs ~ N(0, I), test inputs ~ N(shift * 1, I); responses
// y = sin(2 * sum(x)) + noise on both.
struct HyperShiftProblem {
  Index input_dim = 3;
  double shift = 0.5;
  double noise_std = 0.1;

  ShiftInnerLoss inner_loss() const { return {}; }
  ShiftOuterLoss outer_loss() const { return {}; }
};

}  // namespace kbo
