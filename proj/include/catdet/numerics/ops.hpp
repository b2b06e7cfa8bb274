#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "catdet/tensor.hpp"

namespace catdet::num {

using Rng = std::mt19937_64;

/// Fully connected layer: y = x * weight^T + bias.
struct LinearParams {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }
  void validate() const;
};

/// linear -> ReLU -> linear.
struct MlpParams {
  LinearParams first;
  LinearParams second;

  std::size_t in_dim() const { return first.in_dim(); }
  std::size_t hidden_dim() const { return first.out_dim(); }
  std::size_t out_dim() const { return second.out_dim(); }
  void validate() const;
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materialising the transpose.
Tensor matmul_transposed(const Tensor& a, const Tensor& b);

/// Softmax of v / temperature, computed with max subtraction.
Tensor softmax(const Tensor& v, double temperature = 1.0);
std::vector<double> softmax(std::span<const double> v, double temperature = 1.0);

/// Row-wise softmax of a rank-2 tensor.
Tensor softmax_rows(const Tensor& logits);

Tensor relu(Tensor x);

/// Applies the layer to each row of x ([n, in] -> [n, out]) or to a single vector ([in] -> [out]).
Tensor linear_forward(const LinearParams& p, const Tensor& x);
Tensor mlp_forward(const MlpParams& p, const Tensor& x);

/// Cross-correlation of a [C,H,W] map with [C',C,kh,kw] kernels, optional [C'] bias.
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t padding,
              const Tensor* bias = nullptr);

/// Transposed convolution with [C,C',kh,kw] kernels:
/// H' = (H - 1) * stride - 2 * padding + kh.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
                        std::size_t padding, const Tensor* bias = nullptr);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and bias.
LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng);
MlpParams init_mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);
/// Uniform(-bound, bound) with the given fan-in bound.
Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

LinearParams zero_linear(std::size_t in, std::size_t out);
LinearParams identity_linear(std::size_t dim);

/// Euclidean norm and normalised copy; zero vectors raise NumericError.
double l2_norm(std::span<const double> v);
std::vector<double> l2_normalized(std::span<const double> v);

}  // namespace catdet::num
