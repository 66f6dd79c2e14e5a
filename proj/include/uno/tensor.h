// Copyright 2026 The UNO Toolkit Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef UNO_TENSOR_H_
#define UNO_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace uno {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major array of doubles. Rank 0 (empty shape) holds one scalar.
class Tensor {
 public:
  // Empty tensor of shape {0}.
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value);
  static Tensor Vector(std::vector<double> values);
  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor Identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D element access.
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  // Scalar value of a one-element tensor.
  double item() const;

  // Copy of row `r` of a 2-D tensor.
  std::vector<double> row(std::size_t r) const;

  Tensor Reshaped(Shape shape) const;

  bool AllFinite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Same shape and bit-identical payload (distinguishes -0.0 and NaN payloads).
bool BitEqual(const Tensor& a, const Tensor& b);

// Same shape and elementwise ==.
bool operator==(const Tensor& a, const Tensor& b);

// Largest absolute elementwise difference; shapes must match.
double MaxAbsDiff(const Tensor& a, const Tensor& b);

}  // namespace uno

#endif  // UNO_TENSOR_H_
