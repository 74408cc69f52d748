#include "kbo/instances.hpp"

#include <memory>

#include "kbo/datasets.hpp"
#include "kbo/rng.hpp"

namespace kbo {

EmpiricalProblem make_problem(const KboConfig& config, std::uint64_t data_seed) {
  config.validate();
  EmpiricalProblem prob;
  prob.lambda = config.lambda;
  if (config.instance == ProblemInstance::Iv) {
    const IvDataset ds = generate_iv_data(config.dataset(data_seed, config.n, config.m));
    prob.gram = GramSet::build(config.kernel(), ds.inner_x, ds.outer_x);
    const SineFeatureMap phi(config.d);
    prob.inner_loss = std::make_shared<IvInnerLoss>(phi);
    prob.outer_loss = std::make_shared<IvOuterLoss>(config.d, config.ridge);
    for (Index i = 0; i < ds.inner_t.size(); ++i) prob.inner_targets.emplace_back(Treatment{ds.inner_t(i)});
    for (Index j = 0; j < ds.outer_y.size(); ++j) prob.outer_targets.emplace_back(Response{ds.outer_y(j)});
  } else {
    HyperShiftProblem shift;
    shift.input_dim = config.p;
    const ShiftDataset ds = generate_shift_data(shift, config.n, config.m, data_seed);
    prob.gram = GramSet::build(config.kernel(), ds.train_x, ds.test_x);
    prob.inner_loss = std::make_shared<ShiftInnerLoss>();
    prob.outer_loss = std::make_shared<ShiftOuterLoss>();
    for (Index i = 0; i < ds.train_y.size(); ++i) prob.inner_targets.emplace_back(Response{ds.train_y(i)});
    for (Index j = 0; j < ds.test_y.size(); ++j) prob.outer_targets.emplace_back(Response{ds.test_y(j)});
  }
  prob.validate();
  return prob;
}

ConstraintSet parameter_set(const KboConfig& config) {
  if (config.instance == ProblemInstance::Iv) return ConstraintSet::unconstrained();
  return ConstraintSet::box(VectorXd::Constant(1, 1e-3), VectorXd::Constant(1, 1e3));
}

VectorXd random_parameter(const KboConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd w(config.d);
  const double lo = config.instance == ProblemInstance::Iv ? 0.0 : 0.5;
  for (Index l = 0; l < config.d; ++l) w(l) = lo + rng.uniform();
  return w;
}

}  // namespace kbo
