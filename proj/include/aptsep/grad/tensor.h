// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_GRAD_TENSOR_H_
#define APTSEP_GRAD_TENSOR_H_

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aptsep/common/error.h"

namespace aptsep::grad {

using Shape = std::vector<std::size_t>;

// Product of the dimensions; throws kShapeMismatch on an empty shape or a
// zero dimension.
std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major tensor. A tensor that does not require grad never holds a
// gradient buffer.
template <typename T>
class Tensor {
 public:
  Tensor() : shape_{1}, data_(1, T(0)) {}

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(NumElements(shape_), T(0)) {}

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (NumElements(shape_) != data_.size()) {
      throw Error(Errc::kShapeMismatch,
                  "shape " + ShapeToString(shape_) + " holds " +
                      std::to_string(NumElements(shape_)) + " values, got " +
                      std::to_string(data_.size()));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Keeps the buffer, changes the view. Element count must match.
  void Reshape(Shape shape) {
    if (NumElements(shape) != data_.size()) {
      throw Error(Errc::kShapeMismatch, "cannot reshape " +
                                            ShapeToString(shape_) + " to " +
                                            ShapeToString(shape));
    }
    shape_ = std::move(shape);
  }

  // Resizes to `shape`, reusing capacity. Contents are unspecified.
  void Resize(const Shape& shape) {
    if (shape != shape_) {
      data_.resize(NumElements(shape));
      shape_ = shape;
    }
  }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) {
    requires_grad_ = on;
    if (!on) {
      grad_.clear();
      grad_.shrink_to_fit();
    }
  }

  bool has_grad() const { return !grad_.empty(); }
  std::span<const T> grad() const { return grad_; }
  std::span<T> mutable_grad() { return grad_; }

  void AccumulateGrad(std::span<const T> g, T scale = T(1)) {
    if (!requires_grad_) {
      throw Error(Errc::kInvalidArgument,
                  "gradient accumulated into a tensor without requires_grad");
    }
    if (g.size() != data_.size()) {
      throw Error(Errc::kShapeMismatch, "gradient size " +
                                            std::to_string(g.size()) +
                                            " vs tensor " +
                                            ShapeToString(shape_));
    }
    if (grad_.empty()) grad_.assign(data_.size(), T(0));
    for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += scale * g[i];
  }

  void ZeroGrad() {
    if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), T(0));
  }

  template <typename U>
  Tensor<U> Cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  bool requires_grad_ = false;
  std::vector<T> grad_;
};

}  // namespace aptsep::grad

#endif  // APTSEP_GRAD_TENSOR_H_
