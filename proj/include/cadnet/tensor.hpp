#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cadnet/rng.hpp"
#include "cadnet/shape.hpp"

namespace cadnet {

/// Dense rank-N array of Scalar values in row-major order, backed by an Eigen
/// array. Elementwise math goes through array(); structured operations are
/// free functions below. Default element type across the engine is float;
/// gradient verification re-runs the same code with double.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(Storage::Zero(shape_.count())) {}
  Tensor(Shape shape, Scalar value)
      : shape_(std::move(shape)),
        data_(Storage::Constant(shape_.count(), value)) {}
  Tensor(Shape shape, const std::vector<Scalar>& values)
      : shape_(std::move(shape)) {
    if (static_cast<Index>(values.size()) != shape_.count()) {
      throw std::invalid_argument("Tensor: " + std::to_string(values.size()) +
                                  " values for shape " + shape_.to_string());
    }
    data_ = Eigen::Map<const Storage>(values.data(),
                                      static_cast<Index>(values.size()));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return shape_.rank(); }
  Index size() const { return data_.size(); }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index i, Index j) { return data_[i * shape_.dim(1) + j]; }
  Scalar operator()(Index i, Index j) const {
    return data_[i * shape_.dim(1) + j];
  }
  Scalar& operator()(Index i, Index j, Index k) {
    return data_[(i * shape_.dim(1) + j) * shape_.dim(2) + k];
  }
  Scalar operator()(Index i, Index j, Index k) const {
    return data_[(i * shape_.dim(1) + j) * shape_.dim(2) + k];
  }
  Scalar& operator()(Index i, Index j, Index k, Index l) {
    return data_[((i * shape_.dim(1) + j) * shape_.dim(2) + k) * shape_.dim(3) +
                 l];
  }
  Scalar operator()(Index i, Index j, Index k, Index l) const {
    return data_[((i * shape_.dim(1) + j) * shape_.dim(2) + k) * shape_.dim(3) +
                 l];
  }

 private:
  Shape shape_;
  Storage data_;
};

/// True when both tensors have the same shape and bit-identical values.
template <typename Scalar>
bool bitwise_equal(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

template <typename Scalar>
Tensor<Scalar> full(const Shape& shape, Scalar value) {
  return Tensor<Scalar>(shape, value);
}

/// Same elements, new extents; element count must be preserved. Row-major
/// order of the flat data is unchanged.
template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& t, Shape shape) {
  if (shape.count() != t.size()) {
    throw std::invalid_argument("reshape: cannot view " +
                                t.shape().to_string() + " as " +
                                shape.to_string());
  }
  Tensor<Scalar> out(std::move(shape));
  out.array() = t.array();
  return out;
}

/// Standard matrix product of rank-2 tensors [m,k] x [k,n] -> [m,n].
/// Accumulation runs in fixed row-major order so single-threaded runs are
/// bit-reproducible.
template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul: rank-2 operands required, got " +
                                a.shape().to_string() + " x " +
                                b.shape().to_string());
  }
  const Index m = a.shape().dim(0);
  const Index k = a.shape().dim(1);
  const Index n = b.shape().dim(1);
  if (b.shape().dim(0) != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                a.shape().to_string() + " x " +
                                b.shape().to_string());
  }
  Tensor<Scalar> out(Shape{m, n});
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      Scalar acc = Scalar(0);
      for (Index p = 0; p < k; ++p) {
        acc += a(i, p) * b(p, j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> identity_matrix(Index n) {
  Tensor<Scalar> out(Shape{n, n});
  for (Index i = 0; i < n; ++i) out(i, i) = Scalar(1);
  return out;
}

/// Index of the maximum of a nonempty rank-1 tensor; ties break to the
/// lowest index.
template <typename Scalar>
Index argmax(const Tensor<Scalar>& t) {
  if (t.rank() != 1 || t.size() == 0) {
    throw std::invalid_argument("argmax: nonempty rank-1 tensor required");
  }
  Index best = 0;
  for (Index i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

namespace detail {
template <typename Scalar>
Scalar next_unit(RngState& rng) {
  if constexpr (sizeof(Scalar) <= sizeof(float)) {
    return Scalar(rng.next_unit_float());
  } else {
    return Scalar(rng.next_unit_double());
  }
}
}  // namespace detail

/// Tensor of values uniform in [lo, hi), drawn from rng in flat row-major
/// order. A pure function of (shape, lo, hi, rng seed-and-counter).
template <typename Scalar>
Tensor<Scalar> uniform(const Shape& shape, Scalar lo, Scalar hi,
                       RngState& rng) {
  if (!(lo < hi)) {
    throw std::invalid_argument("uniform: lo must be < hi");
  }
  Tensor<Scalar> out(shape);
  for (Index i = 0; i < out.size(); ++i) {
    out[i] = lo + (hi - lo) * detail::next_unit<Scalar>(rng);
  }
  return out;
}

}  // namespace cadnet
