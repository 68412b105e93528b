#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace afu {

// Dimension list. Rank 0 ([]) is a scalar; tensors of rank > 2 are not used.
using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Throws ShapeError when any dimension is zero.
void validate_shape(const Shape& shape);

// `count` evenly spaced values with both endpoints exact. Throws RangeError
// unless lo < hi and count >= 2.
std::vector<double> linspace(double lo, double hi, std::size_t count);

// Dense row-major double tensor with value semantics.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() : shape{}, data(1, 0.0) {}
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  // Matrix view: rank 2 is [rows, cols]; rank 1 [n] is a 1 x n row.
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const {
    if (shape.size() == 2) return shape[1];
    return shape.empty() ? 1 : shape[0];
  }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols(), cols()};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols(), cols()};
  }

  void fill(double v);
  bool all_finite() const;
};

}  // namespace afu
