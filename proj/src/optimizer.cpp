#include "kbo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "kbo/errors.hpp"

namespace kbo {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Tolerance: return "tolerance";
    case Termination::MaxIter: return "max_iter";
    case Termination::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

std::vector<double> Trajectory::running_min_grad_norm() const {
  std::vector<double> out;
  out.reserve(points.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    best = std::min(best, p.grad_norm);
    out.push_back(best);
  }
  return out;
}

void Trajectory::write_csv(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  os << "iter,f_value,grad_norm,step_size\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    os << i << ',' << points[i].value << ',' << points[i].grad_norm << ',' << points[i].step_size
       << '\n';
  }
  os.precision(old_precision);
}

ConstraintSet ConstraintSet::ball(VectorXd center, double radius) {
  if (!(radius > 0.0)) throw InputError("ConstraintSet::ball: radius must be positive");
  ConstraintSet s;
  s.kind_ = Kind::Ball;
  s.a_ = std::move(center);
  s.radius_ = radius;
  return s;
}

ConstraintSet ConstraintSet::box(VectorXd lo, VectorXd hi) {
  if (lo.size() != hi.size()) throw InputError("ConstraintSet::box: corner dimensions differ");
  if ((lo.array() > hi.array()).any()) throw InputError("ConstraintSet::box: lo must be <= hi");
  ConstraintSet s;
  s.kind_ = Kind::Box;
  s.a_ = std::move(lo);
  s.b_ = std::move(hi);
  return s;
}

VectorXd ConstraintSet::project(const VectorXd& x) const {
  switch (kind_) {
    case Kind::Unconstrained:
      return x;
    case Kind::Ball: {
      if (x.size() != a_.size()) throw InputError("project: dimension mismatch");
      const VectorXd diff = x - a_;
      const double dist = diff.norm();
      if (dist <= radius_) return x;
      return a_ + (radius_ / dist) * diff;
    }
    case Kind::Box:
      if (x.size() != a_.size()) throw InputError("project: dimension mismatch");
      return x.cwiseMax(a_).cwiseMin(b_);
  }
  return x;
}

bool ConstraintSet::contains(const VectorXd& x, double margin) const {
  switch (kind_) {
    case Kind::Unconstrained:
      return x.allFinite();
    case Kind::Ball:
      return x.size() == a_.size() && (x - a_).norm() <= radius_ + margin;
    case Kind::Box:
      return x.size() == a_.size() && ((a_.array() - margin) <= x.array()).all() &&
             (x.array() <= (b_.array() + margin)).all();
  }
  return false;
}

VectorXd project(const ConstraintSet& set, const VectorXd& x) { return set.project(x); }

VectorXd gradient_mapping(const ConstraintSet& set, const VectorXd& omega, const VectorXd& grad,
                          double eta) {
  if (!(eta > 0.0)) throw InputError("gradient_mapping: eta must be positive");
  if (set.kind() == ConstraintSet::Kind::Unconstrained) return grad;
  const VectorXd step = omega - eta * grad;
  if (set.contains(step, 0.0)) return grad;
  return (omega - set.project(step)) / eta;
}

Trajectory gd_run(const VectorXd& omega0, const GradFn& grad_fn, const ValueFn& value_fn,
                  const GdOptions& options) {
  return projected_gd_run(omega0, ConstraintSet::unconstrained(), grad_fn, value_fn, options);
}

Trajectory projected_gd_run(const VectorXd& omega0, const ConstraintSet& set,
                            const GradFn& grad_fn, const ValueFn& value_fn,
                            const GdOptions& options) {
  if (!(options.tol > 0.0)) throw InputError("gradient descent: tol must be positive");
  if (options.max_iter < 0) throw InputError("gradient descent: max_iter must be non-negative");
  const LineSearchParams& ls = options.line_search;
  if (!(ls.initial_step > 0.0) || !(ls.shrink > 0.0 && ls.shrink < 1.0) || !(ls.max_step > 0.0)) {
    throw InputError("gradient descent: invalid line-search parameters");
  }
  if (!set.contains(omega0)) throw InputError("projected gradient descent: omega0 is not in the set");

  Trajectory traj;
  VectorXd omega = omega0;
  double value = value_fn(omega);
  VectorXd grad = grad_fn(omega);
  double trial = std::min(ls.initial_step, ls.max_step);
  // The gradient mapping at the first iterate uses the initial trial step.
  double eta = trial;

  for (int iter = 0;; ++iter) {
    const double gnorm = gradient_mapping(set, omega, grad, eta).norm();
    traj.points.push_back({omega, value, gnorm, 0.0});
    if (gnorm <= options.tol) {
      traj.termination = Termination::Tolerance;
      return traj;
    }
    if (iter >= options.max_iter) {
      traj.termination = Termination::MaxIter;
      return traj;
    }

    double step = trial;
    bool accepted = false;
    VectorXd candidate;
    double cand_value = 0.0;
    for (int h = 0; h <= ls.max_halvings; ++h) {
      candidate = set.project(omega - step * grad);
      cand_value = value_fn(candidate);
      const double decrease = grad.dot(omega - candidate);
      if (std::isfinite(cand_value) && decrease > 0.0 &&
          cand_value <= value - ls.armijo_c * decrease) {
        accepted = true;
        break;
      }
      step *= ls.shrink;
    }
    if (!accepted) {
      traj.termination = Termination::LineSearchFailure;
      return traj;
    }
    traj.points.back().step_size = step;
    omega = std::move(candidate);
    value = cand_value;
    grad = grad_fn(omega);
    eta = step;
    trial = std::min(ls.max_step, 2.0 * step);
  }
}

}  // namespace kbo
