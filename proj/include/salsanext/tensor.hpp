#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "salsanext/error.hpp"

namespace salsanext {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

/// Dense row-major n-dimensional array. Rank-4 tensors use NCHW layout.
template <typename Scalar>
class BasicTensor {
 public:
  using ArrayType = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(ArrayType::Constant(shape_size(shape_), fill)) {}

  BasicTensor(std::initializer_list<Index> shape, Scalar fill = Scalar(0))
      : BasicTensor(Shape(shape), fill) {}

  BasicTensor(Shape shape, ArrayType data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw Error(ErrorCode::Dimension, "data length does not match shape " + shape_string(shape_));
  }

  static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

  /// Contents are indeterminate; for outputs that are written in full.
  static BasicTensor uninitialized(Shape shape) {
    BasicTensor t;
    t.data_.resize(shape_size(shape));
    t.shape_ = std::move(shape);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  ArrayType& array() { return data_; }
  const ArrayType& array() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  // NCHW accessors.
  Index batch() const { return shape_[0]; }
  Index channels() const { return shape_[1]; }
  Index height() const { return shape_[2]; }
  Index width() const { return shape_[3]; }
  Index plane() const { return shape_[2] * shape_[3]; }

  Scalar& operator()(Index n, Index c, Index h, Index w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const Scalar& operator()(Index n, Index c, Index h, Index w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Sample n of an NCHW tensor viewed as a (C, H*W) matrix.
  MatrixMap sample_matrix(Index n) {
    return MatrixMap(data() + n * shape_[1] * plane(), shape_[1], plane());
  }
  ConstMatrixMap sample_matrix(Index n) const {
    return ConstMatrixMap(data() + n * shape_[1] * plane(), shape_[1], plane());
  }

  /// Whole tensor viewed as (rows, size/rows).
  MatrixMap as_matrix(Index rows) { return MatrixMap(data(), rows, size() / rows); }
  ConstMatrixMap as_matrix(Index rows) const {
    return ConstMatrixMap(data(), rows, size() / rows);
  }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_, data_.template cast<Other>().eval());
  }

  bool same_shape(const BasicTensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  Shape shape_;
  ArrayType data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

template <typename Scalar>
void require_rank4(const BasicTensor<Scalar>& x, const char* what) {
  if (x.rank() != 4)
    throw Error(ErrorCode::Dimension,
                std::string(what) + " expects an NCHW tensor, got " + shape_string(x.shape()));
}

template <typename Scalar>
void require_same_shape(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b,
                        const char* what) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::Dimension, std::string(what) + ": shape " + shape_string(a.shape()) +
                                          " vs " + shape_string(b.shape()));
}

template <typename Scalar>
Scalar dot(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  require_same_shape(a, b, "dot");
  return (a.array() * b.array()).sum();
}

}  // namespace salsanext
