#pragma once

#include <cstddef>
#include <vector>

#include "catdet/numerics/ops.hpp"

namespace catdet::num {

struct LinearGrad {
  Tensor weight;
  Tensor bias;
};

LinearGrad zero_grad(const LinearParams& p);

/// Backward pass of linear_forward for a rank-2 input [n, in]. Accumulates into
/// `grad` and returns d loss / d x.
Tensor linear_backward(const LinearParams& p, const Tensor& x, const Tensor& grad_out, LinearGrad& grad);

/// Zeroes grad_out where the ReLU input was not positive.
Tensor relu_backward(const Tensor& pre_activation, Tensor grad_out);

double sigmoid(double x);

/// Adam over a fixed list of parameter tensors.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// grads[i] must match params[i] in shape; state is created on the first step.
  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace catdet::num
