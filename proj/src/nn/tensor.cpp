#include "dmnrank/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "dmnrank/error.hpp"

namespace dmnrank::nn {

namespace {
std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != product(shape_))
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(values_.size()) +
                     " values");
}

std::span<double> Tensor::row(std::size_t i) {
  auto stride = shape_.empty() || shape_[0] == 0 ? 0 : values_.size() / shape_[0];
  return std::span<double>(values_).subspan(i * stride, stride);
}

std::span<const double> Tensor::row(std::size_t i) const {
  auto stride = shape_.empty() || shape_[0] == 0 ? 0 : values_.size() / shape_[0];
  return std::span<const double>(values_).subspan(i * stride, stride);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

void require_shape(const Tensor& t, const Shape& expected, std::string_view what) {
  if (t.shape() != expected)
    throw ShapeError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(t.shape()));
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

}  // namespace dmnrank::nn
