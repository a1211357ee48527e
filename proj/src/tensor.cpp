#include "sbrl/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <utility>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

void validate_shape(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2)
    throw ShapeError("tensor rank must be 1 or 2");
  for (int d : shape)
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) {
  validate_shape(shape);
  if (shape_product(shape) != data.size())
    throw ShapeError("tensor data length does not match shape");
  shape_ = std::move(shape);
  data_ = std::move(data);
  if (!all_finite()) throw NumericError("tensor constructed with non-finite entries");
}

Tensor Tensor::zeros(std::vector<int> shape) {
  validate_shape(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.assign(shape_product(t.shape_), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  if (!std::isfinite(value)) throw NumericError("tensor fill value not finite");
  for (double& v : t.data_) v = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(const std::vector<double>& values) {
  return Tensor({1, static_cast<int>(values.size())}, values);
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::unchecked(std::vector<int> shape, std::vector<double> data) {
  validate_shape(shape);
  if (shape_product(shape) != data.size())
    throw ShapeError("tensor data length does not match shape");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

}  // namespace sbrl
