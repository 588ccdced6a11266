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

#include "jsed/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace jsed {

namespace {

void require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) {
    fail(ErrorCode::kShape,
         std::string(what) + ": expected [batch, channels, freq, time], got " +
             shape_string(s));
  }
}

template <typename T>
inline T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// col[(c*9 + ky*3 + kx), h*W + w] = x[c, h+ky-1, w+kx-1] (zero outside).
template <typename T>
void im2col3x3(const T* x, std::size_t channels, std::size_t height,
               std::size_t width, T* col) {
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* xc = x + c * plane;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* dst = col + (c * 9 + ky * 3 + kx) * plane;
        for (std::size_t h = 0; h < height; ++h) {
          T* row = dst + h * width;
          const std::ptrdiff_t hs = static_cast<std::ptrdiff_t>(h + ky) - 1;
          if (hs < 0 || hs >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(row, row + width, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(hs) * width;
          if (kx == 1) {
            std::memcpy(row, src, width * sizeof(T));
          } else if (kx == 0) {
            row[0] = T(0);
            if (width > 1) std::memcpy(row + 1, src, (width - 1) * sizeof(T));
          } else {
            if (width > 1) std::memcpy(row, src + 1, (width - 1) * sizeof(T));
            row[width - 1] = T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3x3(const T* col, std::size_t channels, std::size_t height,
               std::size_t width, T* x) {
  const std::size_t plane = height * width;
  std::fill(x, x + channels * plane, T(0));
  for (std::size_t c = 0; c < channels; ++c) {
    T* xc = x + c * plane;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* src = col + (c * 9 + ky * 3 + kx) * plane;
        for (std::size_t h = 0; h < height; ++h) {
          const std::ptrdiff_t hs = static_cast<std::ptrdiff_t>(h + ky) - 1;
          if (hs < 0 || hs >= static_cast<std::ptrdiff_t>(height)) continue;
          const T* row = src + h * width;
          T* dst = xc + static_cast<std::size_t>(hs) * width;
          if (kx == 1) {
            for (std::size_t w = 0; w < width; ++w) dst[w] += row[w];
          } else if (kx == 0) {
            for (std::size_t w = 1; w < width; ++w) dst[w - 1] += row[w];
          } else {
            for (std::size_t w = 0; w + 1 < width; ++w) dst[w + 1] += row[w];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T> Conv2d<T>::zeros(std::size_t in_channels, std::size_t out_channels) {
  return Conv2d{Tensor<T>({out_channels, in_channels, 3, 3}),
                Tensor<T>({out_channels})};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) const {
  require_rank4(x.shape(), "conv2d");
  const std::size_t batch = x.dim(0), cin = x.dim(1), height = x.dim(2),
                    width = x.dim(3);
  if (cin != in_channels()) {
    fail(ErrorCode::kShape, "conv2d: input has " + std::to_string(cin) +
                                " channels, layer expects " +
                                std::to_string(in_channels()));
  }
  const std::size_t cout = out_channels();
  const std::size_t plane = height * width;
  const std::size_t k = cin * 9;
  Tensor<T> y({batch, cout, height, width});
  std::vector<T> col(k * plane);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col3x3(x.data() + b * cin * plane, cin, height, width, col.data());
    T* yb = y.data() + b * cout * plane;
    gemm<T>(false, false, cout, plane, k, T(1), weight.data(), col.data(), T(0), yb);
    for (std::size_t c = 0; c < cout; ++c) {
      const T bc = bias[c];
      T* yc = yb + c * plane;
      for (std::size_t i = 0; i < plane; ++i) yc[i] += bc;
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& x, const Tensor<T>& grad_out,
                              Conv2d& grad, bool need_input_grad) const {
  const std::size_t batch = x.dim(0), cin = x.dim(1), height = x.dim(2),
                    width = x.dim(3);
  const std::size_t cout = out_channels();
  const std::size_t plane = height * width;
  const std::size_t k = cin * 9;
  if (grad_out.shape() != Shape{batch, cout, height, width}) {
    fail(ErrorCode::kShape, "conv2d backward: gradient shape mismatch");
  }
  Tensor<T> dx;
  if (need_input_grad) dx = Tensor<T>(x.shape());
  std::vector<T> col(k * plane);
  std::vector<T> dcol(need_input_grad ? k * plane : 0);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* dyb = grad_out.data() + b * cout * plane;
    im2col3x3(x.data() + b * cin * plane, cin, height, width, col.data());
    gemm<T>(false, true, cout, k, plane, T(1), dyb, col.data(), T(1),
            grad.weight.data());
    for (std::size_t c = 0; c < cout; ++c) {
      T acc = T(0);
      const T* dyc = dyb + c * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += dyc[i];
      grad.bias[c] += acc;
    }
    if (need_input_grad) {
      gemm<T>(true, false, k, plane, cout, T(1), weight.data(), dyb, T(0),
              dcol.data());
      col2im3x3(dcol.data(), cin, height, width, dx.data() + b * cin * plane);
    }
  }
  return dx;
}

// ------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T> BatchNorm<T>::identity(std::size_t channels) {
  return BatchNorm{Tensor<T>({channels}, T(1)), Tensor<T>({channels}),
                   Tensor<T>({channels}), Tensor<T>({channels}, T(1))};
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode,
                                Cache* cache) const {
  require_rank4(x.shape(), "batchnorm");
  const std::size_t batch = x.dim(0), channels = x.dim(1),
                    plane = x.dim(2) * x.dim(3);
  if (channels != this->channels()) {
    fail(ErrorCode::kShape, "batchnorm: channel count mismatch");
  }
  const double n = static_cast<double>(batch * plane);
  Tensor<T> y(x.shape());
  Tensor<T> xhat;
  std::vector<T> inv_std(channels);
  std::vector<double> batch_mean, batch_var;
  if (cache) xhat = Tensor<T>(x.shape());
  if (mode == Mode::kTrain) {
    batch_mean.resize(channels);
    batch_var.resize(channels);
  }
  for (std::size_t c = 0; c < channels; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double sum = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* xc = x.data() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += xc[i];
      }
      mean = sum / n;
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* xc = x.data() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = xc[i] - mean;
          sq += d * d;
        }
      }
      var = sq / n;
      batch_mean[c] = mean;
      batch_var[c] = n > 1 ? sq / (n - 1) : var;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const T istd = static_cast<T>(1.0 / std::sqrt(var + kEpsilon));
    const T m = static_cast<T>(mean);
    inv_std[c] = istd;
    const T g = gamma[c], be = beta[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      const T* xc = x.data() + off;
      T* yc = y.data() + off;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = (xc[i] - m) * istd;
        if (cache) xhat[off + i] = h;
        yc[i] = g * h + be;
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(batch_mean);
    cache->batch_var = std::move(batch_var);
  }
  return y;
}

template <typename T>
void BatchNorm<T>::update_running_stats(const Cache& cache) {
  if (cache.mode != Mode::kTrain) return;
  if (cache.batch_mean.size() != channels()) {
    fail(ErrorCode::kInvalidArgument, "batchnorm: missing batch statistics");
  }
  for (std::size_t c = 0; c < channels(); ++c) {
    running_mean[c] = static_cast<T>(kMomentum * running_mean[c] +
                                     (1.0 - kMomentum) * cache.batch_mean[c]);
    running_var[c] = static_cast<T>(kMomentum * running_var[c] +
                                    (1.0 - kMomentum) * cache.batch_var[c]);
  }
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Cache& cache, const Tensor<T>& grad_out,
                                 BatchNorm& grad) const {
  const Tensor<T>& xhat = cache.xhat;
  if (xhat.empty() || xhat.shape() != grad_out.shape()) {
    fail(ErrorCode::kInvalidArgument, "batchnorm backward: missing cache");
  }
  const std::size_t batch = xhat.dim(0), channels = xhat.dim(1),
                    plane = xhat.dim(2) * xhat.dim(3);
  const T n = static_cast<T>(batch * plane);
  Tensor<T> dx(xhat.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    T sum_dy = T(0), sum_dy_xhat = T(0);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += grad_out[off + i] * xhat[off + i];
      }
    }
    grad.gamma[c] += sum_dy_xhat;
    grad.beta[c] += sum_dy;
    const T g = gamma[c];
    const T istd = cache.inv_std[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (cache.mode == Mode::kTrain) {
          dx[off + i] = g * istd *
                        (grad_out[off + i] - sum_dy / n -
                         xhat[off + i] * sum_dy_xhat / n);
        } else {
          dx[off + i] = g * istd * grad_out[off + i];
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------------ ReLU

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& grad_out) {
  Tensor<T> dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    dx[i] = y[i] > T(0) ? grad_out[i] : T(0);
  }
  return dx;
}

// --------------------------------------------------------------- MaxPool

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, PoolSize pool, MaxPoolCache* cache) {
  require_rank4(x.shape(), "maxpool2d");
  const std::size_t batch = x.dim(0), channels = x.dim(1), height = x.dim(2),
                    width = x.dim(3);
  if (pool.freq == 0 || pool.time == 0 || height % pool.freq != 0 ||
      width % pool.time != 0) {
    fail(ErrorCode::kShape, "maxpool2d: extents " + shape_string(x.shape()) +
                                " not divisible by pool " +
                                std::to_string(pool.freq) + "x" +
                                std::to_string(pool.time));
  }
  const std::size_t oh = height / pool.freq, ow = width / pool.time;
  Tensor<T> y({batch, channels, oh, ow});
  if (cache) {
    cache->input_shape = x.shape();
    cache->argmax.resize(y.size());
  }
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const std::size_t base = bc * height * width;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j, ++o) {
        std::size_t best = base + (i * pool.freq) * width + j * pool.time;
        T best_v = x[best];
        for (std::size_t di = 0; di < pool.freq; ++di) {
          const std::size_t row = base + (i * pool.freq + di) * width + j * pool.time;
          for (std::size_t dj = 0; dj < pool.time; ++dj) {
            if (x[row + dj] > best_v) {
              best_v = x[row + dj];
              best = row + dj;
            }
          }
        }
        y[o] = best_v;
        if (cache) cache->argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2d_backward(const MaxPoolCache& cache, const Tensor<T>& grad_out) {
  if (cache.argmax.size() != grad_out.size()) {
    fail(ErrorCode::kInvalidArgument, "maxpool2d backward: missing cache");
  }
  Tensor<T> dx(cache.input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) dx[cache.argmax[o]] += grad_out[o];
  return dx;
}

// ------------------------------------------------------------------- GRU

template <typename T>
GruParams<T> GruParams<T>::zeros(std::size_t input_dim, std::size_t hidden) {
  return GruParams{Tensor<T>({3 * hidden, input_dim}),
                   Tensor<T>({3 * hidden, hidden}), Tensor<T>({3 * hidden}),
                   Tensor<T>({3 * hidden})};
}

namespace {

// Recurrent half of one step. `pre` holds W c + b_in + b_rec for all three
// gates; writes g, r, candidate into `gates` and the new state into `h`.
template <typename T>
void gru_step(const T* pre, const T* h_prev, const GruParams<T>& p, T* gates,
              T* h, std::vector<T>& rh) {
  const std::size_t hidden = p.hidden();
  const T* u = p.u.data();
  T* g = gates;
  T* r = gates + hidden;
  T* cand = gates + 2 * hidden;
  for (std::size_t i = 0; i < hidden; ++i) {
    T ag = pre[i], ar = pre[hidden + i];
    const T* ug = u + i * hidden;
    const T* ur = u + (hidden + i) * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      ag += ug[j] * h_prev[j];
      ar += ur[j] * h_prev[j];
    }
    g[i] = sigmoid_scalar(ag);
    r[i] = sigmoid_scalar(ar);
  }
  for (std::size_t j = 0; j < hidden; ++j) rh[j] = r[j] * h_prev[j];
  for (std::size_t i = 0; i < hidden; ++i) {
    T ah = pre[2 * hidden + i];
    const T* uh = u + (2 * hidden + i) * hidden;
    for (std::size_t j = 0; j < hidden; ++j) ah += uh[j] * rh[j];
    cand[i] = std::tanh(ah);
    h[i] = (T(1) - g[i]) * h_prev[i] + g[i] * cand[i];
  }
}

template <typename T>
void check_gru_shapes(const GruParams<T>& p) {
  const std::size_t hidden = p.u.rank() == 2 ? p.u.dim(1) : 0;
  if (hidden == 0 || p.u.dim(0) != 3 * hidden || p.w.rank() != 2 ||
      p.w.dim(0) != 3 * hidden || p.b_in.size() != 3 * hidden ||
      p.b_rec.size() != 3 * hidden) {
    fail(ErrorCode::kShape, "gru: inconsistent parameter shapes");
  }
}

}  // namespace

template <typename T>
std::vector<T> gru_cell(std::span<const T> input, std::span<const T> h_prev,
                        const GruParams<T>& p) {
  check_gru_shapes(p);
  const std::size_t hidden = p.hidden();
  if (input.size() != p.input_dim() || h_prev.size() != hidden) {
    fail(ErrorCode::kShape, "gru_cell: dimension mismatch");
  }
  std::vector<T> pre(3 * hidden);
  for (std::size_t i = 0; i < 3 * hidden; ++i) {
    T acc = p.b_in[i] + p.b_rec[i];
    const T* wi = p.w.data() + i * p.input_dim();
    for (std::size_t j = 0; j < input.size(); ++j) acc += wi[j] * input[j];
    pre[i] = acc;
  }
  std::vector<T> gates(3 * hidden), h(hidden), rh(hidden);
  gru_step(pre.data(), h_prev.data(), p, gates.data(), h.data(), rh);
  return h;
}

template <typename T>
Tensor<T> gru_sequence(const Tensor<T>& seq, const GruParams<T>& p,
                       Direction direction, GruCache<T>* cache) {
  check_gru_shapes(p);
  if (seq.rank() != 2 || seq.dim(0) == 0) {
    fail(ErrorCode::kShape, "gru: expected a non-empty [T, in] sequence");
  }
  if (seq.dim(1) != p.input_dim()) {
    fail(ErrorCode::kShape, "gru: input width " + std::to_string(seq.dim(1)) +
                                " does not match parameters " +
                                std::to_string(p.input_dim()));
  }
  const std::size_t steps = seq.dim(0), hidden = p.hidden(), g3 = 3 * hidden;
  // Input projections for every step at once: pre = seq W^T + b_in + b_rec.
  Tensor<T> pre({steps, g3});
  gemm<T>(false, true, steps, g3, p.input_dim(), T(1), seq.data(), p.w.data(),
          T(0), pre.data());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < g3; ++i) pre(t, i) += p.b_in[i] + p.b_rec[i];
  }
  Tensor<T> h({steps, hidden});
  Tensor<T> gates({steps, g3});
  std::vector<T> zero(hidden, T(0)), rh(hidden);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = direction == Direction::kForward ? s : steps - 1 - s;
    const T* h_prev = s == 0 ? zero.data()
                             : h.data() + (direction == Direction::kForward ? t - 1 : t + 1) * hidden;
    gru_step(pre.data() + t * g3, h_prev, p, gates.data() + t * g3,
             h.data() + t * hidden, rh);
  }
  if (cache) {
    cache->direction = direction;
    cache->input = seq;
    cache->gates = std::move(gates);
    cache->h = h;
  }
  return h;
}

template <typename T>
Tensor<T> gru_sequence_backward(const GruParams<T>& p, const GruCache<T>& cache,
                                const Tensor<T>& grad_h, GruParams<T>& grad) {
  if (cache.h.empty() || cache.h.shape() != grad_h.shape()) {
    fail(ErrorCode::kInvalidArgument, "gru backward: missing cache");
  }
  const std::size_t steps = cache.h.dim(0), hidden = p.hidden(), g3 = 3 * hidden;
  const bool fwd = cache.direction == Direction::kForward;
  Tensor<T> dpre({steps, g3});
  std::vector<T> carry(hidden, T(0)), dh(hidden), dprev(hidden), drh(hidden),
      rh(hidden), zero(hidden, T(0));
  const T* u = p.u.data();
  T* du = grad.u.data();
  // Reverse of the processing order.
  for (std::size_t s = steps; s-- > 0;) {
    const std::size_t t = fwd ? s : steps - 1 - s;
    const T* h_prev =
        s == 0 ? zero.data() : cache.h.data() + (fwd ? t - 1 : t + 1) * hidden;
    const T* g = cache.gates.data() + t * g3;
    const T* r = g + hidden;
    const T* cand = g + 2 * hidden;
    T* dg = dpre.data() + t * g3;
    T* dr = dg + hidden;
    T* dc = dg + 2 * hidden;
    for (std::size_t i = 0; i < hidden; ++i) {
      dh[i] = grad_h(t, i) + carry[i];
      dprev[i] = dh[i] * (T(1) - g[i]);
      dg[i] = dh[i] * (cand[i] - h_prev[i]) * g[i] * (T(1) - g[i]);
      dc[i] = dh[i] * g[i] * (T(1) - cand[i] * cand[i]);
      rh[i] = r[i] * h_prev[i];
      drh[i] = T(0);
    }
    // Candidate: U_h (r * h_prev).
    for (std::size_t i = 0; i < hidden; ++i) {
      const T* uh = u + (2 * hidden + i) * hidden;
      T* duh = du + (2 * hidden + i) * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        duh[j] += dc[i] * rh[j];
        drh[j] += uh[j] * dc[i];
      }
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      dr[j] = drh[j] * h_prev[j] * r[j] * (T(1) - r[j]);
      dprev[j] += drh[j] * r[j];
    }
    for (std::size_t i = 0; i < hidden; ++i) {
      const T* ug = u + i * hidden;
      const T* ur = u + (hidden + i) * hidden;
      T* dug = du + i * hidden;
      T* dur = du + (hidden + i) * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        dug[j] += dg[i] * h_prev[j];
        dur[j] += dr[i] * h_prev[j];
        dprev[j] += ug[j] * dg[i] + ur[j] * dr[i];
      }
    }
    carry = dprev;
  }
  // Input-side projections.
  gemm<T>(true, false, g3, p.input_dim(), steps, T(1), dpre.data(),
          cache.input.data(), T(1), grad.w.data());
  for (std::size_t i = 0; i < g3; ++i) {
    T acc = T(0);
    for (std::size_t t = 0; t < steps; ++t) acc += dpre(t, i);
    grad.b_in[i] += acc;
    grad.b_rec[i] += acc;
  }
  Tensor<T> dx({steps, p.input_dim()});
  gemm<T>(false, false, steps, p.input_dim(), g3, T(1), dpre.data(), p.w.data(),
          T(0), dx.data());
  return dx;
}

template <typename T>
Tensor<T> bigru(const Tensor<T>& seq, const GruParams<T>& fwd,
                const GruParams<T>& bwd, BiGruCache<T>* cache) {
  const Tensor<T> hf =
      gru_sequence(seq, fwd, Direction::kForward, cache ? &cache->fwd : nullptr);
  const Tensor<T> hb =
      gru_sequence(seq, bwd, Direction::kBackward, cache ? &cache->bwd : nullptr);
  const std::size_t steps = seq.dim(0), h1 = fwd.hidden(), h2 = bwd.hidden();
  Tensor<T> out({steps, h1 + h2});
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy_n(hf.data() + t * h1, h1, out.data() + t * (h1 + h2));
    std::copy_n(hb.data() + t * h2, h2, out.data() + t * (h1 + h2) + h1);
  }
  return out;
}

template <typename T>
Tensor<T> bigru_backward(const GruParams<T>& fwd, const GruParams<T>& bwd,
                         const BiGruCache<T>& cache, const Tensor<T>& grad_out,
                         GruParams<T>& grad_fwd, GruParams<T>& grad_bwd) {
  const std::size_t steps = grad_out.dim(0), h1 = fwd.hidden(), h2 = bwd.hidden();
  Tensor<T> gf({steps, h1}), gb({steps, h2});
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy_n(grad_out.data() + t * (h1 + h2), h1, gf.data() + t * h1);
    std::copy_n(grad_out.data() + t * (h1 + h2) + h1, h2, gb.data() + t * h2);
  }
  Tensor<T> dx = gru_sequence_backward(fwd, cache.fwd, gf, grad_fwd);
  const Tensor<T> dxb = gru_sequence_backward(bwd, cache.bwd, gb, grad_bwd);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxb[i];
  return dx;
}

// -------------------------------------------------------------------- FC

template <typename T>
Fc<T> Fc<T>::zeros(std::size_t in, std::size_t out) {
  return Fc{Tensor<T>({out, in}), Tensor<T>({out})};
}

template <typename T>
Tensor<T> Fc<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    fail(ErrorCode::kShape, "fc: input " + shape_string(x.shape()) +
                                " does not match " +
                                std::to_string(in_features()) + " features");
  }
  const std::size_t n = x.dim(0), out = out_features();
  Tensor<T> y({n, out});
  gemm<T>(false, true, n, out, in_features(), T(1), x.data(), weight.data(),
          T(0), y.data());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out; ++j) y(i, j) += bias[j];
  }
  return y;
}

template <typename T>
Tensor<T> Fc<T>::backward(const Tensor<T>& x, const Tensor<T>& grad_out,
                          Fc& grad, bool need_input_grad) const {
  const std::size_t n = x.dim(0), out = out_features(), in = in_features();
  if (grad_out.shape() != Shape{n, out}) {
    fail(ErrorCode::kShape, "fc backward: gradient shape mismatch");
  }
  gemm<T>(true, false, out, in, n, T(1), grad_out.data(), x.data(), T(1),
          grad.weight.data());
  for (std::size_t j = 0; j < out; ++j) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += grad_out(i, j);
    grad.bias[j] += acc;
  }
  Tensor<T> dx;
  if (need_input_grad) {
    dx = Tensor<T>({n, in});
    gemm<T>(false, false, n, in, out, T(1), grad_out.data(), weight.data(), T(0),
            dx.data());
  }
  return dx;
}

// ----------------------------------------------------------------- heads

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid_scalar(x[i]);
  return y;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.size());
  if (logits.empty()) return out;
  const T mx = *std::max_element(logits.begin(), logits.end());
  T sum = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

#define JSED_INSTANTIATE(T)                                                     \
  template struct Conv2d<T>;                                                    \
  template struct BatchNorm<T>;                                                 \
  template struct GruParams<T>;                                                 \
  template struct Fc<T>;                                                        \
  template Tensor<T> relu<T>(const Tensor<T>&);                                 \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> maxpool2d<T>(const Tensor<T>&, PoolSize, MaxPoolCache*);   \
  template Tensor<T> maxpool2d_backward<T>(const MaxPoolCache&,                 \
                                           const Tensor<T>&);                   \
  template std::vector<T> gru_cell<T>(std::span<const T>, std::span<const T>,   \
                                      const GruParams<T>&);                     \
  template Tensor<T> gru_sequence<T>(const Tensor<T>&, const GruParams<T>&,     \
                                     Direction, GruCache<T>*);                  \
  template Tensor<T> gru_sequence_backward<T>(                                  \
      const GruParams<T>&, const GruCache<T>&, const Tensor<T>&, GruParams<T>&); \
  template Tensor<T> bigru<T>(const Tensor<T>&, const GruParams<T>&,            \
                              const GruParams<T>&, BiGruCache<T>*);             \
  template Tensor<T> bigru_backward<T>(const GruParams<T>&, const GruParams<T>&, \
                                       const BiGruCache<T>&, const Tensor<T>&,  \
                                       GruParams<T>&, GruParams<T>&);           \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                              \
  template std::vector<T> softmax<T>(std::span<const T>);

JSED_INSTANTIATE(float)
JSED_INSTANTIATE(double)
#undef JSED_INSTANTIATE

}  // namespace jsed
