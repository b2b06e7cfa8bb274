#include "catdet/numerics/train.hpp"

#include <cmath>

#include "catdet/errors.hpp"
#include "catdet/numerics/eigen_view.hpp"

namespace catdet::num {

using detail::view;

LinearGrad zero_grad(const LinearParams& p) { return {Tensor(p.weight.shape()), Tensor(p.bias.shape())}; }

Tensor linear_backward(const LinearParams& p, const Tensor& x, const Tensor& grad_out, LinearGrad& grad) {
  if (x.rank() != 2 || grad_out.rank() != 2 || x.dim(0) != grad_out.dim(0) || x.dim(1) != p.in_dim() ||
      grad_out.dim(1) != p.out_dim()) {
    throw ShapeError("linear_backward: shapes " + x.shape_string() + " and " + grad_out.shape_string() +
                     " do not fit the layer");
  }
  view(grad.weight).noalias() += view(grad_out).transpose() * view(x);
  const auto g = view(grad_out);
  for (std::size_t j = 0; j < p.out_dim(); ++j) grad.bias[j] += g.col(static_cast<Eigen::Index>(j)).sum();
  Tensor gx(x.shape());
  view(gx).noalias() = view(grad_out) * view(p.weight);
  return gx;
}

Tensor relu_backward(const Tensor& pre_activation, Tensor grad_out) {
  if (pre_activation.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    if (!(pre_activation[i] > 0.0)) grad_out[i] = 0.0;
  }
  return grad_out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ArgumentError("Adam: learning rate must be positive");
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: parameter and gradient counts differ");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || m_[i].shape() != grads[i]->shape()) {
      throw ShapeError("Adam: gradient " + std::to_string(i) + " does not match its parameter");
    }
    auto p = params[i]->data();
    const auto g = grads[i]->data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1 - beta2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

}  // namespace catdet::num
