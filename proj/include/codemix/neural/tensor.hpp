#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace codemix::nn {

using Shape = std::vector<std::size_t>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Matrix views treat the first dimension as
/// rows and fold the remaining dimensions into columns.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  /// Throws ShapeMismatch if values.size() != product of shape.
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }
  static Tensor scalar(double v) { return Tensor({1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rows() == 0 ? 0 : values_.size() / rows(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  MatrixMap matrix() {
    return MatrixMap(values_.data(), static_cast<Eigen::Index>(rows()),
                     static_cast<Eigen::Index>(cols()));
  }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(values_.data(), static_cast<Eigen::Index>(rows()),
                          static_cast<Eigen::Index>(cols()));
  }

  void fill(double v);
  void reshape(Shape shape);

  /// Exact equality of shape and every value bit pattern.
  bool bit_equal(const Tensor& other) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Throws ShapeMismatch naming `what` when the shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace codemix::nn
