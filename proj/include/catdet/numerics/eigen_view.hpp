#pragma once

#include <Eigen/Dense>

#include "catdet/tensor.hpp"

namespace catdet::num::detail {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;
using VectorD = Eigen::VectorXd;

inline ConstMapRM view(const Tensor& t) { return ConstMapRM(t.data().data(), t.dim(0), t.dim(1)); }
inline MapRM view(Tensor& t) { return MapRM(t.data().data(), t.dim(0), t.dim(1)); }

inline Tensor to_tensor(const MatrixRM& m) {
  Tensor out({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  MapRM(out.data().data(), m.rows(), m.cols()) = m;
  return out;
}

}  // namespace catdet::num::detail
