#include "codemix/neural/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <numeric>

#include "codemix/errors.hpp"

namespace codemix::nn {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  values_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(values_.size()) +
                                              " values do not fill shape " + shape_string(shape_));
  }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != values_.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

bool Tensor::bit_equal(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": " + shape_string(a.shape()) +
                                              " vs " + shape_string(b.shape()));
  }
}

}  // namespace codemix::nn
