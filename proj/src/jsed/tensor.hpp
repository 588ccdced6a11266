/* Copyright 2026 The jsed Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef JSED_TENSOR_HPP_
#define JSED_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "jsed/error.hpp"

namespace jsed {

class Rng;

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Float tensors are used for training runs and double
// tensors for finite-difference gradient checks.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    require(shape_size(shape_) == data_.size(), ErrorCode::kShape,
            "tensor data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k,
                      std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;

  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

// Throws ErrorCode::kNumeric when the tensor holds NaN or Inf.
template <typename T>
void check_finite(const Tensor<T>& t, const char* what);

// Row-major GEMM on raw storage: c = alpha * op(a) * op(b) + beta * c,
// op(a) is m x k and op(b) is k x n. Deterministic for a given build: the
// blocking and reduction order depend only on (m, n, k).
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, T alpha, const T* a, const T* b, T beta, T* c);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> identity(std::size_t n);

enum class EwOp { kAdd, kSub, kMul, kSigmoid, kTanh, kExp, kLog };

// Elementwise kernel. Binary ops need equal shapes; unary ops ignore `b`.
template <typename T>
Tensor<T> ew(EwOp op, const Tensor<T>& a, const Tensor<T>* b = nullptr);

template <typename T>
inline Tensor<T> ew(EwOp op, const Tensor<T>& a, const Tensor<T>& b) {
  return ew(op, a, &b);
}

// Glorot/Xavier uniform in [-L, L], L = sqrt(6 / (fan_in + fan_out)).
// Rank-2 [out, in]; rank-4 conv [out, in, kh, kw] scales fans by kh*kw.
double glorot_limit(const Shape& shape);

template <typename T>
Tensor<T> glorot_init(const Shape& shape, Rng& rng);

}  // namespace jsed

#endif  // JSED_TENSOR_HPP_
