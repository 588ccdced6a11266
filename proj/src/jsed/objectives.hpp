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

#ifndef JSED_OBJECTIVES_HPP_
#define JSED_OBJECTIVES_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "jsed/model.hpp"
#include "jsed/roll.hpp"

namespace jsed {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

// Summed sigmoid cross-entropy over events and frames; probs is [M, T].
template <typename T>
double event_loss(const Tensor<T>& probs, const EventRoll& target);

// -ln probs[target].
template <typename T>
double scene_loss(std::span<const T> probs, std::size_t target);

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
};

inline double mtl_loss(double event_l, double scene_l, const LossWeights& w) {
  return w.alpha * event_l + w.beta * scene_l;
}

// Single-task models train their only head with weight 1 (alpha for the
// event models); the proposed model uses the weights as given.
LossWeights effective_weights(ModelKind kind, const LossWeights& w);

template <typename T>
struct BatchObjective {
  double event = 0;  // summed over the batch
  double scene = 0;
  double total = 0;
  // Gradients w.r.t. logits, already scaled by the loss weights. Empty when
  // the head is absent or its weight is zero.
  Tensor<T> d_event_logits;  // [B, M, T]
  Tensor<T> d_scene_logits;  // [B, N]
};

template <typename T>
BatchObjective<T> batch_objective(const ForwardResult<T>& out,
                                  std::span<const EventRoll* const> rolls,
                                  std::span<const std::size_t> scenes,
                                  const LossWeights& w, bool with_grad);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update; `step` is 1 for the first update.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m,
                 std::span<T> v, std::uint64_t step, const AdamConfig& cfg);

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const Network<T>& net, const AdamConfig& cfg);

  void step(Network<T>& net, const Network<T>& grads);
  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

  void export_state(std::map<std::string, Tensorf>& out) const;
  void import_state(const std::map<std::string, Tensorf>& in);

 private:
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<std::string> names_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

struct GradCheckOptions {
  double step = 2.5e-4;
  // Retries with a step ten times smaller when the stencil crosses a ReLU or
  // max-pool switch point, at most this many times.
  int max_shrinks = 3;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::map<std::string, double> max_rel_error_by_group;
  std::size_t checked = 0;
  std::size_t shrunk = 0;   // probes that needed a smaller step
  std::size_t skipped = 0;  // probes that still crossed a switch point
  // Probes whose analytic/numeric gap is within the rounding resolution of
  // the difference quotient; their error counts as zero.
  std::size_t at_resolution = 0;
  double max_raw_rel_error = 0;  // same, without the resolution allowance
};

// Relative error |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

// Analytic gradients of the weighted objective for one batch (train mode).
Network<double> analytic_gradients(const Network<double>& net, const Tensord& x,
                                   std::span<const EventRoll* const> rolls,
                                   std::span<const std::size_t> scenes,
                                   const LossWeights& w);

// Compares every learnable scalar against five-point central differences of the
// objective. The reported error is |a - n| less the quotient's rounding
// resolution (about eps * |loss| / step), over max(|a|, |n|, 1e-8). Differences are formed per loss term, so a small weight does not
// drown one term in the other's rounding error.
GradCheckReport grad_check_full(const Network<double>& net, const Tensord& x,
                                std::span<const EventRoll* const> rolls,
                                std::span<const std::size_t> scenes,
                                const LossWeights& w,
                                const GradCheckOptions& opts = {});

}  // namespace jsed

#endif  // JSED_OBJECTIVES_HPP_
