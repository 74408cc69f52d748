#pragma once

#include <cstdint>

#include "kbo/config.hpp"
#include "kbo/hypergrad.hpp"
#include "kbo/optimizer.hpp"

namespace kbo {

// The empirical problem described by `config` (instance, sizes, kernel,
// data model) with its sample drawn from `data_seed`. IV instances use the
// Gaussian kernel on the instruments; shift instances the same kernel on the
// train/test inputs.
EmpiricalProblem make_problem(const KboConfig& config, std::uint64_t data_seed);

// Feasible set of the outer parameter: the whole space for IV, a box keeping
// the shift weight positive.
ConstraintSet parameter_set(const KboConfig& config);

// A random outer parameter: U(0, 1)^d for IV, U(0.5, 1.5) for shift.
VectorXd random_parameter(const KboConfig& config, std::uint64_t seed);

}  // namespace kbo
