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

#include "jsed/training.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <numeric>

#include "jsed/metrics.hpp"
#include "jsed/rng.hpp"

namespace jsed {

Selection selection_metric(ModelKind kind, double beta) {
  switch (kind) {
    case ModelKind::kCrnnEvent:
    case ModelKind::kCnnEvent: return Selection::kEventF;
    case ModelKind::kCnnScene: return Selection::kSceneF;
    case ModelKind::kProposed: return beta < 1.0 ? Selection::kEventF : Selection::kSceneF;
  }
  return Selection::kEventF;
}

const char* selection_name(Selection s) {
  return s == Selection::kEventF ? "event_f" : "scene_f";
}

std::size_t argmax(std::span<const float> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

namespace {

template <typename T>
Tensor<T> stack_features(std::span<const Tensorf* const> feats) {
  const Shape s = feats[0]->shape();
  require(s.size() == 2, ErrorCode::kShape, "features must be [D, T]");
  Tensor<T> x({feats.size(), s[0], s[1]});
  T* dst = x.data();
  for (const Tensorf* f : feats) {
    require(f->shape() == s, ErrorCode::kShape,
            "feature maps in a batch differ in shape: " + shape_string(f->shape()) +
                " vs " + shape_string(s));
    for (float v : f->values()) *dst++ = static_cast<T>(v);
  }
  return x;
}

}  // namespace

template <typename T>
TrainState<T> init_train_state(Network<T> net, const TrainConfig& cfg) {
  TrainState<T> st;
  st.opt = Adam<T>(net, cfg.adam);
  st.net = std::move(net);
  return st;
}

template <typename T>
std::vector<ClipScores> predict(const Network<T>& net, std::span<const Tensorf* const> features,
                                std::size_t batch_size) {
  require(batch_size > 0, ErrorCode::kInvalidArgument, "batch size must be positive");
  std::vector<ClipScores> out;
  out.reserve(features.size());
  for (std::size_t start = 0; start < features.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, features.size() - start);
    const auto res =
        net.forward(stack_features<T>(features.subspan(start, n)), Mode::kEval, nullptr);
    for (std::size_t b = 0; b < n; ++b) {
      ClipScores cs;
      if (!res.event_probs.empty()) {
        const std::size_t m = res.event_probs.dim(1), t = res.event_probs.dim(2);
        cs.event_probs = Tensorf({m, t});
        for (std::size_t i = 0; i < m * t; ++i) {
          cs.event_probs[i] = static_cast<float>(res.event_probs[b * m * t + i]);
        }
      }
      if (!res.scene_probs.empty()) {
        const std::size_t k = res.scene_probs.dim(1);
        for (std::size_t i = 0; i < k; ++i) {
          cs.scene_probs.push_back(static_cast<float>(res.scene_probs(b, i)));
        }
      }
      out.push_back(std::move(cs));
    }
  }
  return out;
}

template <typename T>
DevMetrics dev_metrics(const Network<T>& net, std::span<const Example> dev_set,
                       std::size_t batch_size) {
  DevMetrics dm;
  if (dev_set.empty()) return dm;
  std::vector<const Tensorf*> feats;
  for (const auto& e : dev_set) feats.push_back(e.features);
  const auto scores = predict(net, feats, batch_size);
  if (net.has_event_head()) {
    const Thresholds half{std::vector<double>(net.config().n_events, 0.5)};
    Counts total;
    std::vector<FrameTally> frames;
    for (std::size_t i = 0; i < dev_set.size(); ++i) {
      const auto fc = count_frames(binarize(scores[i].event_probs, half), *dev_set[i].roll);
      total += fc.total();
      frames.insert(frames.end(), fc.per_frame.begin(), fc.per_frame.end());
    }
    dm.event_f = prf(total).f;
    dm.event_er = error_rate(frames).er;
  }
  if (net.has_scene_head()) {
    std::vector<std::size_t> preds, refs;
    for (std::size_t i = 0; i < dev_set.size(); ++i) {
      preds.push_back(argmax(scores[i].scene_probs));
      refs.push_back(dev_set[i].scene);
    }
    dm.scene_f = scene_eval(preds, refs, net.config().n_scenes).prf.f;
  }
  return dm;
}

template <typename T>
void train(TrainState<T>& state, std::span<const Example> train_set,
           std::span<const Example> dev_set, const TrainConfig& cfg,
           const TrainCallbacks<T>& callbacks) {
  require(cfg.batch_size > 0, ErrorCode::kConfig, "batch size must be positive");
  if (state.epochs_done >= cfg.epochs) return;
  require(!train_set.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const Example& e = train_set[i];
    require(e.features && e.roll, ErrorCode::kInvalidArgument,
            "training example lacks features or targets");
    // ReLU would otherwise swallow NaN inputs without a trace.
    for (float v : e.features->values()) {
      require(std::isfinite(v), ErrorCode::kNumeric,
              "training clip " + std::to_string(i) + " has a non-finite feature value");
    }
  }
  const ModelKind kind = state.net.kind();
  const LossWeights w = effective_weights(kind, cfg.weights);
  if (cfg.weights.alpha != 1.0) {
    spdlog::warn("event loss weight alpha = {} (default 1.0)", cfg.weights.alpha);
  }
  const Selection sel = selection_metric(kind, cfg.weights.beta);
  const Rng shuffle_root = Rng(cfg.seed).split("shuffle");

  for (std::size_t epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    if (cfg.max_steps && state.opt.steps() >= cfg.max_steps) break;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = shuffle_root.split(static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span<std::size_t>(order));

    double sum_total = 0, sum_event = 0, sum_scene = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps && state.opt.steps() >= cfg.max_steps) break;
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      std::vector<const Tensorf*> feats;
      std::vector<const EventRoll*> rolls;
      std::vector<std::size_t> scenes;
      for (std::size_t i = 0; i < n; ++i) {
        const Example& ex = train_set[order[start + i]];
        feats.push_back(ex.features);
        rolls.push_back(ex.roll);
        scenes.push_back(ex.scene);
      }
      ForwardCache<T> cache;
      const auto out = state.net.forward(stack_features<T>(feats), Mode::kTrain, &cache);
      const auto obj = batch_objective(out, rolls, scenes, w, true);
      if (!std::isfinite(obj.total)) {
        fail(ErrorCode::kNumeric,
             "non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                 std::to_string(state.opt.steps() + 1) + " (event " +
                 std::to_string(obj.event) + ", scene " + std::to_string(obj.scene) + ")");
      }
      Network<T> grads = Network<T>::zeros_like(state.net);
      state.net.backward(cache, obj.d_event_logits.empty() ? nullptr : &obj.d_event_logits,
                         obj.d_scene_logits.empty() ? nullptr : &obj.d_scene_logits, grads);
      state.net.update_batch_stats(cache);
      state.opt.step(state.net, grads);
      sum_total += obj.total;
      sum_event += obj.event;
      sum_scene += obj.scene;
      seen += n;
      if (callbacks.on_step) callbacks.on_step(state.opt.steps(), state.net);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.steps = state.opt.steps();
    if (seen) {
      rec.loss_total = sum_total / static_cast<double>(seen);
      rec.loss_event = sum_event / static_cast<double>(seen);
      rec.loss_scene = sum_scene / static_cast<double>(seen);
    }
    rec.dev = dev_metrics(state.net, dev_set, cfg.batch_size);
    const auto& metric = sel == Selection::kEventF ? rec.dev.event_f : rec.dev.scene_f;
    // Without a dev set, the latest epoch is kept.
    rec.selection = metric ? *metric : static_cast<double>(rec.epoch);
    if (!state.best_score || rec.selection > *state.best_score) {
      state.best_score = rec.selection;
      state.best_epoch = rec.epoch;
      rec.best = true;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.epochs_done = epoch + 1;
    state.history.push_back(rec);
    spdlog::info("epoch {:>3}  loss {:.4f} (event {:.4f}, scene {:.4f})  dev {} {:.4f}{}  {:.1f}s",
                 rec.epoch, rec.loss_total, rec.loss_event, rec.loss_scene,
                 selection_name(sel), metric.value_or(0.0), rec.best ? " *" : "",
                 rec.seconds);
    if (callbacks.on_epoch) callbacks.on_epoch(state, rec);
  }
}

template TrainState<float> init_train_state<float>(Network<float>, const TrainConfig&);
template TrainState<double> init_train_state<double>(Network<double>, const TrainConfig&);
template void train<float>(TrainState<float>&, std::span<const Example>,
                           std::span<const Example>, const TrainConfig&,
                           const TrainCallbacks<float>&);
template void train<double>(TrainState<double>&, std::span<const Example>,
                            std::span<const Example>, const TrainConfig&,
                            const TrainCallbacks<double>&);
template std::vector<ClipScores> predict<float>(const Network<float>&,
                                                std::span<const Tensorf* const>, std::size_t);
template std::vector<ClipScores> predict<double>(const Network<double>&,
                                                 std::span<const Tensorf* const>,
                                                 std::size_t);
template DevMetrics dev_metrics<float>(const Network<float>&, std::span<const Example>,
                                       std::size_t);
template DevMetrics dev_metrics<double>(const Network<double>&, std::span<const Example>,
                                        std::size_t);

}  // namespace jsed
