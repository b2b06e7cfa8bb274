#include "catdet/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "catdet/errors.hpp"

namespace catdet::num {

Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& x, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ArgumentError("finite-difference step must lie in [1e-7, 1e-3]");
  Tensor probe = x;
  Tensor grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double plus = f(probe);
    probe[i] = saved - h;
    const double minus = f(probe);
    probe[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) throw OracleError("non-finite function probe", i);
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor) {
  if (analytic.shape() != numeric.shape()) throw ShapeError("gradient shapes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace catdet::num
