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

#include "jsed/tensor.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

#include "jsed/rng.hpp"

namespace jsed {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  if (!t.all_finite()) {
    fail(ErrorCode::kNumeric, std::string(what) + ": non-finite value");
  }
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, T alpha, const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  Eigen::Map<Mat> cm(c, mi, ni);
  if (beta == T(0)) {
    cm.setZero();
  } else if (beta != T(1)) {
    cm *= beta;
  }
  if (m == 0 || n == 0 || k == 0) return;
  // op(a) is m x k; a stored k x m when transposed.
  if (!trans_a && !trans_b) {
    cm.noalias() += alpha * (CMap(a, mi, ki) * CMap(b, ki, ni));
  } else if (trans_a && !trans_b) {
    cm.noalias() += alpha * (CMap(a, ki, mi).transpose() * CMap(b, ki, ni));
  } else if (!trans_a && trans_b) {
    cm.noalias() += alpha * (CMap(a, mi, ki) * CMap(b, ni, ki).transpose());
  } else {
    cm.noalias() +=
        alpha * (CMap(a, ki, mi).transpose() * CMap(b, ni, ki).transpose());
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorCode::kShape,
          "matmul expects rank-2 operands");
  require(a.dim(1) == b.dim(0), ErrorCode::kShape,
          "matmul inner extents differ: " + shape_string(a.shape()) + " * " +
              shape_string(b.shape()));
  Tensor<T> out({a.dim(0), b.dim(1)});
  gemm<T>(false, false, a.dim(0), b.dim(1), a.dim(1), T(1), a.data(), b.data(),
          T(0), out.data());
  check_finite(out, "matmul");
  return out;
}

template <typename T>
Tensor<T> identity(std::size_t n) {
  Tensor<T> out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = T(1);
  return out;
}

template <typename T>
Tensor<T> ew(EwOp op, const Tensor<T>& a, const Tensor<T>* b) {
  const bool binary = op == EwOp::kAdd || op == EwOp::kSub || op == EwOp::kMul;
  if (binary) {
    require(b != nullptr, ErrorCode::kInvalidArgument,
            "binary elementwise op needs two operands");
    require(a.shape() == b->shape(), ErrorCode::kShape,
            "elementwise shape mismatch: " + shape_string(a.shape()) + " vs " +
                shape_string(b->shape()));
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T x = a[i];
    switch (op) {
      case EwOp::kAdd: out[i] = x + (*b)[i]; break;
      case EwOp::kSub: out[i] = x - (*b)[i]; break;
      case EwOp::kMul: out[i] = x * (*b)[i]; break;
      case EwOp::kSigmoid: out[i] = T(1) / (T(1) + std::exp(-x)); break;
      case EwOp::kTanh: out[i] = std::tanh(x); break;
      case EwOp::kExp: out[i] = std::exp(x); break;
      case EwOp::kLog:
        require(x > T(0), ErrorCode::kNumeric, "log of non-positive value");
        out[i] = std::log(x);
        break;
    }
  }
  check_finite(out, "ew");
  return out;
}

double glorot_limit(const Shape& shape) {
  require(!shape.empty(), ErrorCode::kShape, "glorot_init needs a non-empty shape");
  double fan_in = 0.0;
  double fan_out = 0.0;
  if (shape.size() == 1) {
    fan_in = fan_out = static_cast<double>(shape[0]);
  } else {
    double receptive = 1.0;
    for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
    fan_out = static_cast<double>(shape[0]) * receptive;
    fan_in = static_cast<double>(shape[1]) * receptive;
  }
  return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
Tensor<T> glorot_init(const Shape& shape, Rng& rng) {
  const double limit = glorot_limit(shape);
  Tensor<T> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<T>(limit * (2.0 * rng.uniform() - 1.0));
  }
  return out;
}

#define JSED_INSTANTIATE(T)                                                   \
  template class Tensor<T>;                                                   \
  template void check_finite<T>(const Tensor<T>&, const char*);               \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t, T, \
                        const T*, const T*, T, T*);                           \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> identity<T>(std::size_t);                                \
  template Tensor<T> ew<T>(EwOp, const Tensor<T>&, const Tensor<T>*);         \
  template Tensor<T> glorot_init<T>(const Shape&, Rng&);

JSED_INSTANTIATE(float)
JSED_INSTANTIATE(double)
#undef JSED_INSTANTIATE

}  // namespace jsed
