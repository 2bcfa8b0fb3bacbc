#include "tkgr/tensor.hpp"

namespace tkgr {

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (std::size_t d : shape_) n *= d;
  data_.assign(n, 0.0);
}

// Scalars share the rank-1 size-1 shape so mixed arithmetic never needs
// shape promotion.
Tensor Tensor::scalar(double v) {
  Tensor t(std::vector<std::size_t>{1});
  t.data_[0] = v;
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

Tensor Tensor::of(std::vector<double> values) {
  Tensor t;
  t.shape_ = {values.size()};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::of(std::vector<double> values, std::vector<std::size_t> shape) {
  Tensor t;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != values.size()) fail(ErrorKind::contract, "Tensor::of shape/value mismatch");
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) fail(ErrorKind::contract, "rows() on non-matrix tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) fail(ErrorKind::contract, "cols() on non-matrix tensor");
  return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  return data_[r * shape_[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return data_[r * shape_[1] + c];
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorKind::contract, "item() on tensor with size != 1");
  return data_[0];
}

}  // namespace tkgr
