#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadnet {

using Index = Eigen::Index;

/// Extents of a rank-N tensor in row-major significance order (dims[0] is the
/// slowest-varying axis). Every extent must be >= 1; a default-constructed
/// Shape is the rank-0 "null" shape with zero elements.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<Index> dims) : Shape(std::vector<Index>(dims)) {}
  explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
    count_ = dims_.empty() ? 0 : 1;
    for (Index d : dims_) {
      if (d < 1) {
        throw std::invalid_argument("Shape: extent must be >= 1, got " +
                                    std::to_string(d));
      }
      if (count_ > std::numeric_limits<Index>::max() / d) {
        throw std::invalid_argument("Shape: element count overflows");
      }
      count_ *= d;
    }
  }

  Index rank() const { return static_cast<Index>(dims_.size()); }
  Index dim(Index axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
  Index count() const { return count_; }
  const std::vector<Index>& dims() const { return dims_; }

  bool operator==(const Shape& other) const { return dims_ == other.dims_; }
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<Index> dims_;
  Index count_ = 0;
};

}  // namespace cadnet
