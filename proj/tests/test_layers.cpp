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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "jsed/layers.hpp"
#include "jsed/rng.hpp"

namespace jsed {
namespace {

template <typename T>
Tensor<T> randn(Shape s, Rng& rng, double scale = 1.0) {
  Tensor<T> t(std::move(s));
  for (auto& v : t.values()) v = static_cast<T>(scale * rng.normal());
  return t;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

// Central-difference check of `analytic` against loss(), perturbing `values`
// in place at up to `probes` random positions.
template <typename T>
double max_fd_error(std::span<T> values, std::span<const T> analytic,
                    const std::function<double()>& loss, double step, Rng& rng,
                    std::size_t probes = 24) {
  double worst = 0;
  const std::size_t n = values.size();
  for (std::size_t p = 0; p < std::min(probes, n); ++p) {
    const std::size_t i = n <= probes ? p : rng.index(n);
    const T saved = values[i];
    values[i] = static_cast<T>(saved + step);
    const double up = loss();
    values[i] = static_cast<T>(saved - step);
    const double down = loss();
    values[i] = saved;
    worst = std::max(worst, rel_err(analytic[i], (up - down) / (2 * step)));
  }
  return worst;
}

// ---------------------------------------------------------------- conv

TEST(Conv2d, CenteredDeltaIsIdentity) {
  Rng rng(1);
  auto conv = Conv2d<double>::zeros(2, 2);
  conv.weight(0, 0, 1, 1) = 1;
  conv.weight(1, 1, 1, 1) = 1;
  const auto x = randn<double>({2, 2, 5, 6}, rng);
  EXPECT_EQ(conv.forward(x), x);
}

TEST(Conv2d, ZeroInputGivesBias) {
  Rng rng(2);
  auto conv = Conv2d<double>::zeros(3, 2);
  conv.weight = randn<double>({2, 3, 3, 3}, rng);
  conv.bias = Tensord({2}, {0.5, -1.5});
  const auto y = conv.forward(Tensord({1, 3, 4, 4}));
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y(0, c, i, j), conv.bias[c]);
    }
  }
}

TEST(Conv2d, AllOnesThreeByThree) {
  auto conv = Conv2d<double>::zeros(1, 1);
  conv.weight.fill(1);
  const auto y = conv.forward(Tensord({1, 1, 3, 3}, std::vector<double>(9, 1.0)));
  EXPECT_EQ(y(0, 0, 1, 1), 9);
  EXPECT_EQ(y(0, 0, 0, 0), 4);
  EXPECT_EQ(y(0, 0, 0, 2), 4);
  EXPECT_EQ(y(0, 0, 2, 0), 4);
  EXPECT_EQ(y(0, 0, 2, 2), 4);
  EXPECT_EQ(y(0, 0, 0, 1), 6);
}

TEST(Conv2d, MatchesDirectSum) {
  Rng rng(3);
  auto conv = Conv2d<double>::zeros(3, 4);
  conv.weight = randn<double>({4, 3, 3, 3}, rng);
  conv.bias = randn<double>({4}, rng);
  const auto x = randn<double>({2, 3, 5, 7}, rng);
  const auto y = conv.forward(x);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 5, 7}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t o = 0; o < 4; ++o) {
      for (long i = 0; i < 5; ++i) {
        for (long j = 0; j < 7; ++j) {
          double s = conv.bias[o];
          for (std::size_t c = 0; c < 3; ++c) {
            for (long di = -1; di <= 1; ++di) {
              for (long dj = -1; dj <= 1; ++dj) {
                const long ii = i + di, jj = j + dj;
                if (ii < 0 || ii >= 5 || jj < 0 || jj >= 7) continue;
                s += conv.weight(o, c, di + 1, dj + 1) * x(b, c, ii, jj);
              }
            }
          }
          EXPECT_NEAR(y(b, o, i, j), s, 1e-12);
        }
      }
    }
  }
}

TEST(Conv2d, ChannelMismatchThrows) {
  auto conv = Conv2d<double>::zeros(3, 2);
  EXPECT_THROW(conv.forward(Tensord({1, 2, 4, 4})), Error);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  auto conv = Conv2d<double>::zeros(2, 3);
  conv.weight = randn<double>({3, 2, 3, 3}, rng);
  conv.bias = randn<double>({3}, rng);
  auto x = randn<double>({2, 2, 4, 5}, rng);
  const auto w = randn<double>({2, 3, 4, 5}, rng);
  auto grad = Conv2d<double>::zeros(2, 3);
  const auto gx = conv.backward(x, w, grad, true);
  auto loss = [&] { return dot(conv.forward(x), w); };
  EXPECT_LT(max_fd_error<double>(conv.weight.values(), grad.weight.values(), loss, 1e-5, rng), 1e-6);
  EXPECT_LT(max_fd_error<double>(conv.bias.values(), grad.bias.values(), loss, 1e-5, rng), 1e-6);
  EXPECT_LT(max_fd_error<double>(x.values(), gx.values(), loss, 1e-5, rng), 1e-6);
}

TEST(Conv2d, SinglePrecisionGradients) {
  Rng rng(5);
  auto conv = Conv2d<float>::zeros(2, 2);
  conv.weight = randn<float>({2, 2, 3, 3}, rng);
  auto x = randn<float>({1, 2, 4, 4}, rng);
  const auto w = randn<float>({1, 2, 4, 4}, rng);
  auto grad = Conv2d<float>::zeros(2, 2);
  const auto gx = conv.backward(x, w, grad, true);
  auto loss = [&] { return dot(conv.forward(x), w); };
  EXPECT_LT(max_fd_error<float>(conv.weight.values(), grad.weight.values(), loss, 1e-2, rng), 1e-3);
  EXPECT_LT(max_fd_error<float>(x.values(), gx.values(), loss, 1e-2, rng), 1e-3);
}

TEST(Conv2d, ZeroUpstreamGradient) {
  Rng rng(6);
  auto conv = Conv2d<double>::zeros(2, 2);
  conv.weight = randn<double>({2, 2, 3, 3}, rng);
  const auto x = randn<double>({1, 2, 3, 3}, rng);
  auto grad = Conv2d<double>::zeros(2, 2);
  const auto gx = conv.backward(x, Tensord({1, 2, 3, 3}), grad, true);
  for (double v : gx.values()) EXPECT_EQ(v, 0.0);
  for (double v : grad.weight.values()) EXPECT_EQ(v, 0.0);
  for (double v : grad.bias.values()) EXPECT_EQ(v, 0.0);
}

// ---------------------------------------------------------- batch norm

TEST(BatchNorm, TrainModeStandardizes) {
  Rng rng(7);
  auto bn = BatchNorm<double>::identity(3);
  Tensord x({4, 3, 5, 6});
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < 30; ++i) x[(b * 3 + c) * 30 + i] = 5.0 * c + (c + 1) * rng.normal();
    }
  }
  BatchNorm<double>::Cache cache;
  const auto y = bn.forward(x, Mode::kTrain, &cache);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t i = 0; i < 30; ++i) {
        const double v = y[(b * 3 + c) * 30 + i];
        s += v;
        s2 += v * v;
      }
    }
    EXPECT_NEAR(s / 120, 0.0, 1e-5);
    EXPECT_NEAR(s2 / 120 - (s / 120) * (s / 120), 1.0, 1e-5);
  }
}

TEST(BatchNorm, ConstantChannelGivesBeta) {
  auto bn = BatchNorm<double>::identity(1);
  bn.beta[0] = 0.75;
  bn.gamma[0] = 3.0;
  BatchNorm<double>::Cache cache;
  const auto y = bn.forward(Tensord({2, 1, 2, 2}, std::vector<double>(8, 4.0)), Mode::kTrain, &cache);
  for (double v : y.values()) EXPECT_EQ(v, 0.75);
}

TEST(BatchNorm, AffineLaw) {
  Rng rng(8);
  auto bn = BatchNorm<double>::identity(1);
  bn.gamma[0] = 2;
  bn.beta[0] = 3;
  auto x = randn<double>({8, 1, 4, 4}, rng);
  BatchNorm<double>::Cache cache;
  const auto y = bn.forward(x, Mode::kTrain, &cache);
  const double mean = std::accumulate(y.values().begin(), y.values().end(), 0.0) / 128;
  double var = 0;
  for (double v : y.values()) var += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 3.0, 1e-4);
  EXPECT_NEAR(std::sqrt(var / 128), 2.0, 1e-4);
}

TEST(BatchNorm, RunningStatisticsAndEvalMode) {
  Rng rng(9);
  auto bn = BatchNorm<double>::identity(2);
  auto x = randn<double>({3, 2, 2, 2}, rng);
  BatchNorm<double>::Cache cache;
  bn.forward(x, Mode::kTrain, &cache);
  bn.update_running_stats(cache);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_NEAR(bn.running_mean[c], 0.1 * cache.batch_mean[c], 1e-15);
    EXPECT_NEAR(bn.running_var[c], 0.9 + 0.1 * cache.batch_var[c], 1e-15);
    EXPECT_GE(bn.running_var[c], 0.0);
  }
  const auto y = bn.forward(x, Mode::kEval, nullptr);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < 4; ++i) {
        const std::size_t k = (b * 2 + c) * 4 + i;
        EXPECT_NEAR(y[k], (x[k] - bn.running_mean[c]) / std::sqrt(bn.running_var[c] + 1e-5), 1e-12);
      }
    }
  }
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  auto bn = BatchNorm<double>::identity(2);
  bn.gamma = randn<double>({2}, rng);
  bn.beta = randn<double>({2}, rng);
  auto x = randn<double>({3, 2, 2, 3}, rng);
  const auto w = randn<double>({3, 2, 2, 3}, rng);
  BatchNorm<double>::Cache cache;
  bn.forward(x, Mode::kTrain, &cache);
  auto grad = BatchNorm<double>::identity(2);
  grad.gamma.fill(0);
  grad.beta.fill(0);
  const auto gx = bn.backward(cache, w, grad);
  auto loss = [&] {
    BatchNorm<double>::Cache c;
    return dot(bn.forward(x, Mode::kTrain, &c), w);
  };
  EXPECT_LT(max_fd_error<double>(bn.gamma.values(), grad.gamma.values(), loss, 1e-5, rng), 1e-6);
  EXPECT_LT(max_fd_error<double>(bn.beta.values(), grad.beta.values(), loss, 1e-5, rng), 1e-6);
  EXPECT_LT(max_fd_error<double>(x.values(), gx.values(), loss, 1e-5, rng), 1e-6);
}

// ------------------------------------------------------------ max pool

TEST(MaxPool, ConstantMap) {
  MaxPoolCache cache;
  const auto y = maxpool2d(Tensord({1, 2, 4, 6}, std::vector<double>(48, 2.5)), {2, 3}, &cache);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 2, 2}));
  for (double v : y.values()) EXPECT_EQ(v, 2.5);
}

TEST(MaxPool, DefaultFrequencyPool) {
  const auto y = maxpool2d(Tensorf({1, 1, 64, 500}), {8, 1}, nullptr);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 8, 500}));
}

TEST(MaxPool, HandExampleAndRouting) {
  MaxPoolCache cache;
  const Tensord x({1, 1, 2, 2}, {1, 5, 3, 2});
  const auto y = maxpool2d(x, {2, 2}, &cache);
  EXPECT_EQ(y, Tensord({1, 1, 1, 1}, {5}));
  const auto g = maxpool2d_backward(cache, Tensord({1, 1, 1, 1}, {7}));
  EXPECT_EQ(g, Tensord({1, 1, 2, 2}, {0, 7, 0, 0}));
}

TEST(MaxPool, TiesRouteToLowestIndex) {
  MaxPoolCache cache;
  maxpool2d(Tensord({1, 1, 2, 2}, {4, 4, 4, 4}), {2, 2}, &cache);
  EXPECT_EQ(maxpool2d_backward(cache, Tensord({1, 1, 1, 1}, {1})),
            Tensord({1, 1, 2, 2}, {1, 0, 0, 0}));
}

TEST(MaxPool, NonDivisibleThrows) {
  EXPECT_THROW(maxpool2d(Tensord({1, 1, 5, 4}), {2, 1}, nullptr), Error);
}

TEST(MaxPool, EachOutputGradientLandsOnce) {
  Rng rng(11);
  const auto x = randn<double>({2, 3, 4, 6}, rng);
  MaxPoolCache cache;
  const auto y = maxpool2d(x, {2, 3}, &cache);
  const auto g = maxpool2d_backward(cache, Tensord(y.shape(), std::vector<double>(y.size(), 1.0)));
  EXPECT_EQ(std::accumulate(g.values().begin(), g.values().end(), 0.0), static_cast<double>(y.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] != 0) EXPECT_TRUE(std::find(y.values().begin(), y.values().end(), x[i]) != y.values().end());
  }
}

// ----------------------------------------------------------------- GRU

double sigm(double v) { return 1 / (1 + std::exp(-v)); }

// Scalar-loop GRU step, written directly from the gate equations.
std::vector<double> gru_reference(const std::vector<double>& c, const std::vector<double>& h,
                                  const GruParams<double>& p) {
  const std::size_t H = h.size(), I = c.size();
  auto pre = [&](std::size_t gate, std::size_t j, const std::vector<double>& hv) {
    const std::size_t row = gate * H + j;
    double s = p.b_in[row] + p.b_rec[row];
    for (std::size_t i = 0; i < I; ++i) s += p.w(row, i) * c[i];
    for (std::size_t k = 0; k < H; ++k) s += p.u(row, k) * hv[k];
    return s;
  };
  std::vector<double> g(H), r(H), rh(H), out(H);
  for (std::size_t j = 0; j < H; ++j) {
    g[j] = sigm(pre(0, j, h));
    r[j] = sigm(pre(1, j, h));
    rh[j] = r[j] * h[j];
  }
  for (std::size_t j = 0; j < H; ++j) {
    out[j] = (1 - g[j]) * h[j] + g[j] * std::tanh(pre(2, j, rh));
  }
  return out;
}

GruParams<double> random_gru(std::size_t in, std::size_t H, Rng& rng, double scale = 0.5) {
  auto p = GruParams<double>::zeros(in, H);
  p.w = randn<double>({3 * H, in}, rng, scale);
  p.u = randn<double>({3 * H, H}, rng, scale);
  p.b_in = randn<double>({3 * H}, rng, scale);
  p.b_rec = randn<double>({3 * H}, rng, scale);
  return p;
}

TEST(GruCell, ZeroParametersHalveState) {
  const auto p = GruParams<double>::zeros(3, 2);
  const std::vector<double> c{1, -2, 3}, h{0.8, -0.4};
  const auto out = gru_cell<double>(c, h, p);
  EXPECT_DOUBLE_EQ(out[0], 0.4);
  EXPECT_DOUBLE_EQ(out[1], -0.2);
}

TEST(GruCell, SaturatedUpdateGateTakesCandidate) {
  auto p = GruParams<double>::zeros(2, 2);
  for (std::size_t j = 0; j < 2; ++j) p.b_in[j] = 50;
  const auto out = gru_cell<double>(std::vector<double>{1, 2}, std::vector<double>{0.9, -0.7}, p);
  for (double v : out) EXPECT_LT(std::abs(v), 1e-20);
}

TEST(GruCell, MatchesScalarReference) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_gru(2, 2, rng, 1.0);
    const std::vector<double> c{rng.normal(), rng.normal()}, h{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto a = gru_cell<double>(c, h, p);
    const auto b = gru_reference(c, h, p);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
  }
}

TEST(GruCell, StateStaysBounded) {
  Rng rng(13);
  const auto p = random_gru(3, 4, rng, 2.0);
  std::vector<double> h{0.3, -0.2, 0.9, 0.0};
  for (int t = 0; t < 50; ++t) {
    const std::vector<double> c{3 * rng.normal(), 3 * rng.normal(), 3 * rng.normal()};
    const auto next = gru_cell<double>(c, h, p);
    double hmax = 0;
    for (double v : h) hmax = std::max(hmax, std::abs(v));
    for (double v : next) EXPECT_LE(std::abs(v), std::max(hmax, 1.0));
    h = next;
  }
}

TEST(GruCell, DimensionMismatchThrows) {
  const auto p = GruParams<double>::zeros(3, 2);
  EXPECT_THROW(gru_cell<double>(std::vector<double>{1, 2}, std::vector<double>{0, 0}, p), Error);
}

TEST(BiGru, SingleStepIsTwoIndependentCells) {
  Rng rng(14);
  const auto pf = random_gru(3, 2, rng), pb = random_gru(3, 2, rng);
  const auto seq = randn<double>({1, 3}, rng);
  const auto y = bigru<double>(seq, pf, pb, nullptr);
  ASSERT_EQ(y.shape(), (Shape{1, 4}));
  const std::vector<double> c(seq.values().begin(), seq.values().end()), zero(2, 0.0);
  const auto f = gru_reference(c, zero, pf), b = gru_reference(c, zero, pb);
  EXPECT_NEAR(y(0, 0), f[0], 1e-12);
  EXPECT_NEAR(y(0, 1), f[1], 1e-12);
  EXPECT_NEAR(y(0, 2), b[0], 1e-12);
  EXPECT_NEAR(y(0, 3), b[1], 1e-12);
}

TEST(BiGru, ReversalSymmetry) {
  Rng rng(15);
  const std::size_t T = 7, H = 3;
  const auto pf = random_gru(4, H, rng), pb = random_gru(4, H, rng);
  const auto seq = randn<double>({T, 4}, rng);
  Tensord rev({T, 4});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < 4; ++i) rev(t, i) = seq(T - 1 - t, i);
  }
  const auto y = bigru<double>(seq, pf, pb, nullptr);
  const auto yr = bigru<double>(rev, pb, pf, nullptr);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < H; ++j) {
      EXPECT_NEAR(yr(t, j), y(T - 1 - t, H + j), 1e-12);
      EXPECT_NEAR(yr(t, H + j), y(T - 1 - t, j), 1e-12);
    }
  }
}

TEST(BiGru, DefaultWidth) {
  const auto p = GruParams<float>::zeros(256, 32);
  EXPECT_EQ(bigru<float>(Tensorf({5, 256}), p, p, nullptr).shape(), (Shape{5, 64}));
  EXPECT_THROW(bigru<float>(Tensorf({0, 256}), p, p, nullptr), Error);
}

TEST(BiGru, MatchesUnrolledReference) {
  Rng rng(16);
  const std::size_t T = 5, H = 2, I = 3;
  const auto pf = random_gru(I, H, rng), pb = random_gru(I, H, rng);
  const auto seq = randn<double>({T, I}, rng);
  const auto y = bigru<double>(seq, pf, pb, nullptr);
  std::vector<double> hf(H, 0), hb(H, 0);
  for (std::size_t t = 0; t < T; ++t) {
    hf = gru_reference({seq(t, 0), seq(t, 1), seq(t, 2)}, hf, pf);
    for (std::size_t j = 0; j < H; ++j) EXPECT_NEAR(y(t, j), hf[j], 1e-12);
  }
  for (std::size_t t = T; t-- > 0;) {
    hb = gru_reference({seq(t, 0), seq(t, 1), seq(t, 2)}, hb, pb);
    for (std::size_t j = 0; j < H; ++j) EXPECT_NEAR(y(t, H + j), hb[j], 1e-12);
  }
}

TEST(BiGru, GradientsMatchFiniteDifferences) {
  Rng rng(17);
  const std::size_t T = 6, H = 3, I = 4;
  auto pf = random_gru(I, H, rng), pb = random_gru(I, H, rng);
  auto seq = randn<double>({T, I}, rng);
  const auto w = randn<double>({T, 2 * H}, rng);
  BiGruCache<double> cache;
  bigru(seq, pf, pb, &cache);
  auto gf = GruParams<double>::zeros(I, H), gb = GruParams<double>::zeros(I, H);
  const auto gseq = bigru_backward(pf, pb, cache, w, gf, gb);
  auto loss = [&] { return dot(bigru<double>(seq, pf, pb, nullptr), w); };
  for (auto [p, g] : {std::pair{&pf, &gf}, std::pair{&pb, &gb}}) {
    EXPECT_LT(max_fd_error<double>(p->w.values(), g->w.values(), loss, 1e-5, rng), 1e-6);
    EXPECT_LT(max_fd_error<double>(p->u.values(), g->u.values(), loss, 1e-5, rng), 1e-6);
    EXPECT_LT(max_fd_error<double>(p->b_in.values(), g->b_in.values(), loss, 1e-5, rng), 1e-6);
    EXPECT_LT(max_fd_error<double>(p->b_rec.values(), g->b_rec.values(), loss, 1e-5, rng), 1e-6);
  }
  EXPECT_LT(max_fd_error<double>(seq.values(), gseq.values(), loss, 1e-5, rng), 1e-6);
}

// ------------------------------------------------------------------ FC

TEST(Fc, IdentityAndBiasOnly) {
  auto fc = Fc<double>::zeros(3, 3);
  for (std::size_t i = 0; i < 3; ++i) fc.weight(i, i) = 1;
  const Tensord x({1, 3}, {1, -2, 3});
  EXPECT_EQ(fc.forward(x), x);
  auto b = Fc<double>::zeros(3, 2);
  b.bias = Tensord({2}, {4, 5});
  EXPECT_EQ(b.forward(x), Tensord({1, 2}, {4, 5}));
}

TEST(Fc, HandExample) {
  Fc<double> fc{Tensord({2, 2}, {1, 2, 3, 4}), Tensord({2}, {0, 1})};
  EXPECT_EQ(fc.forward(Tensord({1, 2}, {1, 1})), Tensord({1, 2}, {3, 8}));
  EXPECT_THROW(fc.forward(Tensord({1, 3})), Error);
}

TEST(Fc, IdentityBackwardPassesGradient) {
  auto fc = Fc<double>::zeros(3, 3);
  for (std::size_t i = 0; i < 3; ++i) fc.weight(i, i) = 1;
  auto grad = Fc<double>::zeros(3, 3);
  const Tensord g({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(fc.backward(Tensord({2, 3}), g, grad, true), g);
}

TEST(Fc, GradientsMatchFiniteDifferences) {
  Rng rng(18);
  Fc<double> fc{randn<double>({4, 5}, rng), randn<double>({4}, rng)};
  auto x = randn<double>({3, 5}, rng);
  const auto w = randn<double>({3, 4}, rng);
  auto grad = Fc<double>::zeros(5, 4);
  const auto gx = fc.backward(x, w, grad, true);
  auto loss = [&] { return dot(fc.forward(x), w); };
  EXPECT_LT(max_fd_error<double>(fc.weight.values(), grad.weight.values(), loss, 1e-5, rng), 1e-6);
  EXPECT_LT(max_fd_error<double>(fc.bias.values(), grad.bias.values(), loss, 1e-5, rng), 1e-6);
  EXPECT_LT(max_fd_error<double>(x.values(), gx.values(), loss, 1e-5, rng), 1e-6);
}

TEST(Relu, ForwardBackward) {
  const Tensord x({4}, {-1, 0, 2, -3});
  const auto y = relu(x);
  EXPECT_EQ(y, Tensord({4}, {0, 0, 2, 0}));
  EXPECT_EQ(relu_backward(y, Tensord({4}, {1, 1, 1, 1})), Tensord({4}, {0, 0, 1, 0}));
}

// --------------------------------------------------------------- heads

TEST(Heads, SoftmaxExamples) {
  for (double v : softmax<double>(std::vector<double>{0, 0, 0, 0})) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto s = softmax<double>(std::vector<double>{1, 2, 3, 4});
  const double expected[] = {0.0321, 0.0871, 0.2369, 0.6439};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s[i], expected[i], 1e-4);
}

TEST(Heads, SoftmaxSumsToOneAndIgnoresShift) {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(6);
    for (auto& v : z) v = 20 * rng.normal();
    const auto a = softmax<double>(z);
    EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 1.0, 1e-9);
    for (auto& v : z) v += 123.0;
    const auto b = softmax<double>(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
  }
}

TEST(Heads, SigmoidRange) {
  const auto y = sigmoid(Tensord({4}, {-20, -1, 1, 20}));
  for (double v : y.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

}  // namespace
}  // namespace jsed
