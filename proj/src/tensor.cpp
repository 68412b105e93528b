#include "afu/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "afu/error.hpp"

namespace afu {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void validate_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("invalid shape " + to_string(shape) + ": zero dimension");
  }
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (!(lo < hi)) throw RangeError("linspace: lower bound must be below upper bound");
  if (count < 2) throw RangeError("linspace: at least two points required");
  std::vector<double> v(count);
  const double span = hi - lo;
  const auto last = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) v[i] = lo + span * static_cast<double>(i) / last;
  v.back() = hi;
  return v;
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)) {
  validate_shape(shape);
  data.assign(numel(shape), fill);
}

Tensor::Tensor(Shape s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  validate_shape(shape);
  if (data.size() != numel(shape)) {
    throw ShapeError("tensor of shape " + to_string(shape) + " given " +
                     std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace afu
