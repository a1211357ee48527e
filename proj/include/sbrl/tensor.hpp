#pragma once

#include <span>
#include <string>
#include <vector>

namespace sbrl {

// Dense row-major tensor of 64-bit floats, rank 1 or 2. Construction rejects
// NaN/Inf and shape/size disagreement. Values are immutable in spirit: the
// toolkit treats tensors as values and copies freely (everything is small).
class Tensor {
 public:
  Tensor() = default;

  // Validating constructor: product(shape) must equal data length and every
  // entry must be finite.
  Tensor(std::vector<int> shape, std::vector<double> data);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  // [1, n] row matrix from a flat vector.
  static Tensor row(const std::vector<double>& values);
  static Tensor matrix(int rows, int cols, std::vector<double> data);
  // Internal factory that skips the finiteness scan; used by tape ops that
  // run their own per-op check.
  static Tensor unchecked(std::vector<int> shape, std::vector<double> data);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int size() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors; rank-1 tensors are treated as a single row.
  int rows() const { return rank() == 2 ? shape_[0] : 1; }
  int cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }

  double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;

  // Marks this tensor as a differentiation target when bound as a tape leaf.
  bool requires_grad = false;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace sbrl
