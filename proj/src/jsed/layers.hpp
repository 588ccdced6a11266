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

#ifndef JSED_LAYERS_HPP_
#define JSED_LAYERS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "jsed/tensor.hpp"

namespace jsed {

enum class Mode { kTrain, kEval };

// Feature maps are rank-4 [batch, channels, freq, time].

// 3x3 convolution, stride 1, zero padding 1 (shape preserving).
template <typename T>
struct Conv2d {
  Tensor<T> weight;  // [out, in, 3, 3]
  Tensor<T> bias;    // [out]

  static Conv2d zeros(std::size_t in_channels, std::size_t out_channels);
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }

  Tensor<T> forward(const Tensor<T>& x) const;
  // Accumulates parameter gradients into `grad`. Returns dL/dx when
  // `need_input_grad`, otherwise an empty tensor.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& grad_out,
                     Conv2d& grad, bool need_input_grad) const;
};

// Per-channel normalization over batch x freq x time.
template <typename T>
struct BatchNorm {
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  Tensor<T> gamma;          // [C]
  Tensor<T> beta;           // [C]
  Tensor<T> running_mean;   // [C], not learnable
  Tensor<T> running_var;    // [C], not learnable

  struct Cache {
    Mode mode = Mode::kTrain;
    Tensor<T> xhat;
    std::vector<T> inv_std;
    std::vector<double> batch_mean;  // train mode only
    std::vector<double> batch_var;   // unbiased, train mode only
  };

  static BatchNorm identity(std::size_t channels);
  std::size_t channels() const { return gamma.size(); }

  // Train mode normalizes with batch statistics; eval mode with the running
  // statistics. Train mode requires a cache (the batch statistics land there).
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  // running = momentum * running + (1 - momentum) * batch.
  void update_running_stats(const Cache& cache);
  Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_out,
                     BatchNorm& grad) const;
};

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
// `y` is the forward output.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& grad_out);

struct PoolSize {
  std::size_t freq = 1;
  std::size_t time = 1;
  bool operator==(const PoolSize&) const = default;
};

struct MaxPoolCache {
  Shape input_shape;
  std::vector<std::uint32_t> argmax;  // flat input index per output cell
};

// Non-overlapping max pooling; ties resolve to the lowest flat index.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, PoolSize pool, MaxPoolCache* cache);
template <typename T>
Tensor<T> maxpool2d_backward(const MaxPoolCache& cache, const Tensor<T>& grad_out);

// GRU parameters for one direction. Gates are stacked row-wise in the order
// update (g), reset (r), candidate (h). Each gate carries an input-side and a
// recurrent-side bias; both add to the gate pre-activation.
template <typename T>
struct GruParams {
  Tensor<T> w;      // [3H, in]
  Tensor<T> u;      // [3H, H]
  Tensor<T> b_in;   // [3H]
  Tensor<T> b_rec;  // [3H]

  static GruParams zeros(std::size_t input_dim, std::size_t hidden);
  std::size_t hidden() const { return u.dim(1); }
  std::size_t input_dim() const { return w.dim(1); }
};

enum class Direction { kForward, kBackward };

// One step:
//   g = sigmoid(W_g c + U_g h + b_g)
//   r = sigmoid(W_r c + U_r h + b_r)
//   h' = (1 - g) * h + g * tanh(W_h c + U_h (r * h) + b_h)
template <typename T>
std::vector<T> gru_cell(std::span<const T> input, std::span<const T> h_prev,
                        const GruParams<T>& p);

template <typename T>
struct GruCache {
  Direction direction = Direction::kForward;
  Tensor<T> input;  // [T, in]
  Tensor<T> gates;  // [T, 3H]: g, r, candidate
  Tensor<T> h;      // [T, H]
};

// Runs the cell over a [T, in] sequence from a zero state. The backward
// direction iterates t = T-1 .. 0 with h_{t+1} as the recurrent input.
template <typename T>
Tensor<T> gru_sequence(const Tensor<T>& seq, const GruParams<T>& p,
                       Direction direction, GruCache<T>* cache);
// Backpropagation through time. Returns dL/dseq.
template <typename T>
Tensor<T> gru_sequence_backward(const GruParams<T>& p, const GruCache<T>& cache,
                                const Tensor<T>& grad_h, GruParams<T>& grad);

template <typename T>
struct BiGruCache {
  GruCache<T> fwd;
  GruCache<T> bwd;
};

// [T, in] -> [T, 2H], row t = concat(h_fwd[t], h_bwd[t]).
template <typename T>
Tensor<T> bigru(const Tensor<T>& seq, const GruParams<T>& fwd,
                const GruParams<T>& bwd, BiGruCache<T>* cache);
template <typename T>
Tensor<T> bigru_backward(const GruParams<T>& fwd, const GruParams<T>& bwd,
                         const BiGruCache<T>& cache, const Tensor<T>& grad_out,
                         GruParams<T>& grad_fwd, GruParams<T>& grad_bwd);

template <typename T>
struct Fc {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]

  static Fc zeros(std::size_t in, std::size_t out);
  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  // Rows of x are independent samples: [N, in] -> [N, out].
  Tensor<T> forward(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& grad_out, Fc& grad,
                     bool need_input_grad) const;
};

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

// Max-subtracted softmax.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

}  // namespace jsed

#endif  // JSED_LAYERS_HPP_
