#include "catdet/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "catdet/errors.hpp"

namespace catdet {
namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  std::size_t n = 1;
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + catdet::shape_string(shape));
    n *= extent;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  const std::size_t n = element_count(shape_);
  if (data_.size() != n) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     catdet::shape_string(shape_));
  }
  check_finite("Tensor construction");
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::filled(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  t.check_finite("Tensor::filled");
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + catdet::shape_string(shape_));
  }
  return shape_[axis];
}

std::span<double> Tensor::row(std::size_t i) {
  return std::span<double>(data_).subspan(i * shape_[1], shape_[1]);
}

std::span<const double> Tensor::row(std::size_t i) const {
  return std::span<const double>(data_).subspan(i * shape_[1], shape_[1]);
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + catdet::shape_string(shape_) + " to " + catdet::shape_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Tensor::check_finite(std::string_view context) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(std::string(context) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

std::string Tensor::shape_string() const { return catdet::shape_string(shape_); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> indices) {
  if (t.rank() != 2) throw ShapeError("gather_rows expects a rank-2 tensor");
  if (indices.empty()) throw ShapeError("gather_rows needs at least one index");
  const std::size_t cols = t.dim(1);
  Tensor out({indices.size(), cols});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= t.dim(0)) throw ArgumentError("gather_rows index out of range");
    auto src = t.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Tensor concat_columns(std::initializer_list<const Tensor*> parts) {
  if (parts.size() == 0) throw ShapeError("concat_columns needs at least one part");
  const std::size_t rows = (*parts.begin())->dim(0);
  std::size_t cols = 0;
  for (const Tensor* p : parts) {
    if (p->rank() != 2 || p->dim(0) != rows) throw ShapeError("concat_columns row mismatch");
    cols += p->dim(1);
  }
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r).begin();
    for (const Tensor* p : parts) {
      auto src = p->row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

Tensor concat_rows(const Tensor& top, const Tensor& bottom) {
  if (top.rank() != 2 || bottom.rank() != 2 || top.dim(1) != bottom.dim(1)) {
    throw ShapeError("concat_rows column mismatch");
  }
  std::vector<double> data(top.storage().begin(), top.storage().end());
  data.insert(data.end(), bottom.storage().begin(), bottom.storage().end());
  return Tensor({top.dim(0) + bottom.dim(0), top.dim(1)}, std::move(data));
}

}  // namespace catdet
