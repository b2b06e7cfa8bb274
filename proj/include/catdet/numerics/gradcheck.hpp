#pragma once

#include <cstddef>
#include <functional>

#include "catdet/tensor.hpp"

namespace catdet::num {

using ScalarFunction = std::function<double(const Tensor&)>;

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
/// Requires h in [1e-7, 1e-3]; a non-finite probe raises OracleError naming the coordinate.
Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& x, double h = 1e-6);

/// Elementwise |a - n| / max(|a|, |n|, floor), maximised over all entries.
double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-8);

}  // namespace catdet::num
