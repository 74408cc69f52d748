#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kbo {

using Eigen::Index;
using Eigen::VectorXd;

struct LineSearchParams {
  double initial_step = 1.0;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  int max_halvings = 50;
  // Each iteration starts from min(max_step, 2 * previous accepted step).
  double max_step = 1.0;
};

struct GdOptions {
  double tol = 1e-5;
  int max_iter = 10000;
  LineSearchParams line_search{};
};

enum class Termination { Tolerance, MaxIter, LineSearchFailure };
std::string to_string(Termination t);

struct TrajectoryPoint {
  VectorXd omega;
  double value = 0.0;
  // ||grad|| for plain GD, ||G_eta|| for projected GD.
  double grad_norm = 0.0;
  // Step used to leave this iterate; 0 for the final one.
  double step_size = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  Termination termination = Termination::MaxIter;

  int iterations() const noexcept { return points.empty() ? 0 : static_cast<int>(points.size()) - 1; }
  const TrajectoryPoint& final_point() const { return points.back(); }
  // Running minimum of grad_norm over the first t+1 iterates.
  std::vector<double> running_min_grad_norm() const;

  void write_csv(std::ostream& os) const;  // iter,f_value,grad_norm,step_size
};

class ConstraintSet {
 public:
  enum class Kind { Unconstrained, Ball, Box };

  static ConstraintSet unconstrained() { return ConstraintSet(); }
  static ConstraintSet ball(VectorXd center, double radius);
  static ConstraintSet box(VectorXd lo, VectorXd hi);

  Kind kind() const noexcept { return kind_; }
  VectorXd project(const VectorXd& x) const;
  // Membership with slack: distance outside the set at most `margin`.
  bool contains(const VectorXd& x, double margin = 1e-12) const;

 private:
  Kind kind_ = Kind::Unconstrained;
  VectorXd a_;  // center or lower corner
  VectorXd b_;  // upper corner
  double radius_ = 0.0;
};

VectorXd project(const ConstraintSet& set, const VectorXd& x);

// (omega - P_C(omega - eta grad)) / eta.
VectorXd gradient_mapping(const ConstraintSet& set, const VectorXd& omega, const VectorXd& grad,
                          double eta);

using ValueFn = std::function<double(const VectorXd&)>;
using GradFn = std::function<VectorXd(const VectorXd&)>;

// Backtracking gradient descent. Stops when ||grad|| <= tol.
Trajectory gd_run(const VectorXd& omega0, const GradFn& grad_fn, const ValueFn& value_fn,
                  const GdOptions& options = {});

// omega_{t+1} = P_C(omega_t - eta_t grad). Stops when the gradient mapping at
// the last accepted step size has norm <= tol. Throws InputError if omega0 is
// not in the set.
Trajectory projected_gd_run(const VectorXd& omega0, const ConstraintSet& set,
                            const GradFn& grad_fn, const ValueFn& value_fn,
                            const GdOptions& options = {});

}  // namespace kbo
