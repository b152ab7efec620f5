/*
 * Copyright 2026 The DRE Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dre {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline std::size_t shape_numel(const Shape& shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major n-d array. Ops treat it as a matrix of
/// rows() x cols() where cols() is the trailing dimension.
template <typename T>
class Tensor {
public:
  using Scalar = T;
  using MatrixMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
    : shape_(std::move(shape)), values_(shape_numel(shape_), fill)
  {
    for (auto d : shape_) {
      if (d == 0) {
        throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
      }
    }
  }

  Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), values_(std::move(values))
  {
    if (values_.size() != shape_numel(shape_)) {
      throw ShapeError("value count " + std::to_string(values_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<T> values)
  {
    return Tensor({rows, cols}, std::vector<T>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : values_.size() / cols(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T>& storage() { return values_; }
  const std::vector<T>& storage() const { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  T item() const
  {
    if (values_.size() != 1) {
      throw ShapeError("item() requires a single-element tensor, got " + shape_string(shape_));
    }
    return values_[0];
  }

  MatrixMap mat()
  {
    return MatrixMap(values_.data(), static_cast<Eigen::Index>(rows()),
                     static_cast<Eigen::Index>(cols()));
  }
  ConstMatrixMap mat() const
  {
    return ConstMatrixMap(values_.data(), static_cast<Eigen::Index>(rows()),
                          static_cast<Eigen::Index>(cols()));
  }

  Tensor reshaped(Shape shape) const
  {
    if (shape_numel(shape) != values_.size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), values_);
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  Tensor& operator+=(const Tensor& other)
  {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  bool all_finite() const
  {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  T max_abs() const
  {
    T m = 0;
    for (T v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  void require_same_shape(const Tensor& other, const char* what) const
  {
    if (shape_ != other.shape_) {
      throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(shape_) + " vs " +
                       shape_string(other.shape_));
    }
  }

  template <typename U>
  Tensor<U> cast() const
  {
    std::vector<U> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b)
  {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

private:
  Shape shape_;
  std::vector<T> values_;
};

}  // namespace dre
