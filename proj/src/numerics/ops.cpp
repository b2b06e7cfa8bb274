#include "catdet/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catdet/errors.hpp"
#include "catdet/numerics/eigen_view.hpp"

namespace catdet::num {

using detail::MapRM;
using detail::MatrixRM;
using detail::view;

void LinearParams::validate() const {
  if (weight.rank() != 2) throw ShapeError("linear weight must be rank 2");
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("linear bias " + bias.shape_string() + " does not match weight " + weight.shape_string());
  }
}

void MlpParams::validate() const {
  first.validate();
  second.validate();
  if (second.in_dim() != first.out_dim()) {
    throw ShapeError("mlp inner dims do not chain: " + std::to_string(first.out_dim()) + " vs " +
                     std::to_string(second.in_dim()));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects rank-2 operands");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul inner dims differ: " + a.shape_string() + " x " + b.shape_string());
  }
  Tensor out({a.dim(0), b.dim(1)});
  view(out).noalias() = view(a) * view(b);
  out.check_finite("matmul");
  return out;
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul_transposed expects rank-2 operands");
  if (a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_transposed inner dims differ: " + a.shape_string() + " x " + b.shape_string() + "^T");
  }
  Tensor out({a.dim(0), b.dim(0)});
  view(out).noalias() = view(a) * view(b).transpose();
  out.check_finite("matmul_transposed");
  return out;
}

std::vector<double> softmax(std::span<const double> v, double temperature) {
  if (v.empty()) throw ShapeError("softmax of an empty vector");
  if (!(temperature > 0.0)) throw ArgumentError("softmax temperature must be positive");
  const double peak = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp((v[i] - peak) / temperature);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

Tensor softmax(const Tensor& v, double temperature) {
  if (v.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor");
  return Tensor({v.size()}, softmax(v.data(), temperature));
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows expects a rank-2 tensor");
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    auto p = softmax(logits.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

Tensor relu(Tensor x) {
  for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
  return x;
}

Tensor linear_forward(const LinearParams& p, const Tensor& x) {
  p.validate();
  if (x.rank() == 1) {
    if (x.dim(0) != p.in_dim()) throw ShapeError("linear input width mismatch");
    Tensor out({p.out_dim()});
    Eigen::Map<Eigen::VectorXd>(out.data().data(), p.out_dim()) =
        view(p.weight) * Eigen::Map<const Eigen::VectorXd>(x.data().data(), x.size()) +
        Eigen::Map<const Eigen::VectorXd>(p.bias.data().data(), p.out_dim());
    out.check_finite("linear_forward");
    return out;
  }
  if (x.rank() != 2 || x.dim(1) != p.in_dim()) {
    throw ShapeError("linear input " + x.shape_string() + " does not match weight " + p.weight.shape_string());
  }
  Tensor out({x.dim(0), p.out_dim()});
  auto o = view(out);
  o.noalias() = view(x) * view(p.weight).transpose();
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(p.bias.data().data(), p.out_dim());
  out.check_finite("linear_forward");
  return out;
}

Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
  p.validate();
  return linear_forward(p.second, relu(linear_forward(p.first, x)));
}

namespace {

std::size_t output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  const long long span = static_cast<long long>(in) + 2 * static_cast<long long>(padding) -
                         static_cast<long long>(kernel);
  if (stride == 0 || span < 0) return 0;
  return static_cast<std::size_t>(span) / stride + 1;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t padding,
              const Tensor* bias) {
  if (input.rank() != 3 || kernels.rank() != 4) throw ShapeError("conv2d expects [C,H,W] input and [C',C,kh,kw] kernels");
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const std::size_t out_channels = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != channels) throw ShapeError("conv2d kernel channels do not match input");
  if (stride == 0) throw ArgumentError("conv2d stride must be positive");
  const std::size_t out_h = output_extent(height, kh, stride, padding);
  const std::size_t out_w = output_extent(width, kw, stride, padding);
  if (out_h == 0 || out_w == 0) throw ShapeError("conv2d output extents are not positive");
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_channels)) throw ShapeError("conv2d bias mismatch");

  const std::size_t patch = channels * kh * kw;
  const detail::ConstMapRM weights(kernels.data().data(), out_channels, patch);
  Tensor out({out_channels, out_h, out_w});
  MapRM out_view(out.data().data(), out_channels, out_h * out_w);

  // im2col over bands of output rows keeps the column buffer bounded.
  const std::size_t band_rows = std::max<std::size_t>(1, (1u << 22) / std::max<std::size_t>(1, patch * out_w));
  MatrixRM cols;
  const auto in = input.data();
  for (std::size_t row0 = 0; row0 < out_h; row0 += band_rows) {
    const std::size_t rows = std::min(band_rows, out_h - row0);
    cols.setZero(patch, rows * out_w);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::size_t prow = (c * kh + ky) * kw + kx;
          for (std::size_t oy = 0; oy < rows; ++oy) {
            const long long iy = static_cast<long long>((row0 + oy) * stride + ky) - static_cast<long long>(padding);
            if (iy < 0 || iy >= static_cast<long long>(height)) continue;
            const double* src = &in[(c * height + static_cast<std::size_t>(iy)) * width];
            for (std::size_t ox = 0; ox < out_w; ++ox) {
              const long long ix = static_cast<long long>(ox * stride + kx) - static_cast<long long>(padding);
              if (ix < 0 || ix >= static_cast<long long>(width)) continue;
              cols(prow, oy * out_w + ox) = src[ix];
            }
          }
        }
      }
    }
    out_view.middleCols(row0 * out_w, rows * out_w).noalias() = weights * cols;
  }
  if (bias) {
    for (std::size_t oc = 0; oc < out_channels; ++oc) out_view.row(oc).array() += (*bias)[oc];
  }
  out.check_finite("conv2d");
  return out;
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
                        std::size_t padding, const Tensor* bias) {
  if (input.rank() != 3 || kernels.rank() != 4) {
    throw ShapeError("conv_transpose2d expects [C,H,W] input and [C,C',kh,kw] kernels");
  }
  const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  if (kernels.dim(0) != channels) throw ShapeError("conv_transpose2d kernel channels do not match input");
  if (stride == 0) throw ArgumentError("conv_transpose2d stride must be positive");
  const std::size_t out_channels = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
  const long long full_h = static_cast<long long>((height - 1) * stride + kh) - 2 * static_cast<long long>(padding);
  const long long full_w = static_cast<long long>((width - 1) * stride + kw) - 2 * static_cast<long long>(padding);
  if (full_h <= 0 || full_w <= 0) throw ShapeError("conv_transpose2d output extents are not positive");
  if (bias && (bias->rank() != 1 || bias->dim(0) != out_channels)) throw ShapeError("conv_transpose2d bias mismatch");
  const auto out_h = static_cast<std::size_t>(full_h), out_w = static_cast<std::size_t>(full_w);

  // Per input pixel, contributions = kernels^T * input column: [C'*kh*kw, H*W].
  const std::size_t taps = out_channels * kh * kw;
  const detail::ConstMapRM weights(kernels.data().data(), channels, taps);
  const detail::ConstMapRM in(input.data().data(), channels, height * width);
  const MatrixRM contrib = weights.transpose() * in;

  Tensor out({out_channels, out_h, out_w});
  for (std::size_t oc = 0; oc < out_channels; ++oc) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const std::size_t tap = (oc * kh + ky) * kw + kx;
        for (std::size_t iy = 0; iy < height; ++iy) {
          const long long oy = static_cast<long long>(iy * stride + ky) - static_cast<long long>(padding);
          if (oy < 0 || oy >= full_h) continue;
          for (std::size_t ix = 0; ix < width; ++ix) {
            const long long ox = static_cast<long long>(ix * stride + kx) - static_cast<long long>(padding);
            if (ox < 0 || ox >= full_w) continue;
            out(oc, static_cast<std::size_t>(oy), static_cast<std::size_t>(ox)) += contrib(tap, iy * width + ix);
          }
        }
      }
    }
  }
  if (bias) {
    for (std::size_t oc = 0; oc < out_channels; ++oc) {
      auto plane = out.data().subspan(oc * out_h * out_w, out_h * out_w);
      for (double& v : plane) v += (*bias)[oc];
    }
  }
  out.check_finite("conv_transpose2d");
  return out;
}

Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng) {
  LinearParams p;
  p.weight = init_uniform({out, in}, in, rng);
  p.bias = init_uniform({out}, in, rng);
  return p;
}

MlpParams init_mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  MlpParams p;
  p.first = init_linear(in, hidden, rng);
  p.second = init_linear(hidden, out, rng);
  return p;
}

LinearParams zero_linear(std::size_t in, std::size_t out) {
  return LinearParams{Tensor({out, in}), Tensor({out})};
}

LinearParams identity_linear(std::size_t dim) {
  LinearParams p = zero_linear(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) p.weight(i, i) = 1.0;
  return p;
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

std::vector<double> l2_normalized(std::span<const double> v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("cannot L2-normalise a zero or non-finite vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

}  // namespace catdet::num
