#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "mgrad/error.hpp"

namespace mgrad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major array with an explicit shape. Rank 0 is a scalar.
///
/// Rank-2 tensors expose an Eigen matrix view; rank-1 tensors view as a
/// single row, so a bias of shape [n] lines up with the columns of an
/// activation of shape [batch, n].
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  BasicTensor() : values_(Storage::Zero(1)) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_extents();
    values_ = Storage::Zero(shape_size(shape_));
  }

  BasicTensor(Shape shape, Storage values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_extents();
    if (values_.size() != shape_size(shape_)) {
      throw ShapeError("tensor: " + std::to_string(values_.size()) + " values for shape " +
                       shape_string(shape_));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), from_list(values)) {}

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor constant(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.values_.setConstant(value);
    return t;
  }

  static BasicTensor scalar(Scalar value) { return BasicTensor(Shape{}, Storage::Constant(1, value)); }

  static BasicTensor from_matrix(const Matrix& m) {
    BasicTensor t(Shape{m.rows(), m.cols()});
    t.matrix() = m;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return values_.size(); }

  Index rows() const { return shape_.size() >= 2 ? shape_[0] : 1; }
  Index cols() const { return shape_.empty() ? 1 : (shape_.size() == 1 ? shape_[0] : size() / shape_[0]); }

  Storage& values() { return values_; }
  const Storage& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](Index i) { return values_[i]; }
  Scalar operator[](Index i) const { return values_[i]; }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape_) + " is not a scalar");
    return values_[0];
  }

  MatrixMap matrix() { return MatrixMap(values_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(values_.data(), rows(), cols()); }

  bool all_finite() const { return values_.isFinite().all(); }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), values_); }

 private:
  static Storage from_list(std::initializer_list<Scalar> values) {
    Storage s(static_cast<Index>(values.size()));
    std::copy(values.begin(), values.end(), s.data());
    return s;
  }

  void check_extents() const {
    for (Index d : shape_) {
      if (d <= 0) throw ShapeError("tensor: non-positive extent in shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  Storage values_;
};

/// Same shape and identical bit patterns in every element.
template <typename Scalar>
bool bit_equal(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

template <typename Scalar>
Scalar max_abs_diff(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return (a.values() - b.values()).abs().maxCoeff();
}

using Tensor = BasicTensor<double>;

}  // namespace mgrad
