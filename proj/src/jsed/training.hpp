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

#ifndef JSED_TRAINING_HPP_
#define JSED_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jsed/objectives.hpp"

namespace jsed {

struct TrainConfig {
  LossWeights weights{1.0, 0.01};
  AdamConfig adam;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  std::size_t max_steps = 0;  // stop after this many optimizer steps; 0 = no cap
};

// One training or evaluation clip. Features are [D, T], already normalized.
struct Example {
  const Tensorf* features = nullptr;
  const EventRoll* roll = nullptr;
  std::size_t scene = 0;
};

enum class Selection { kEventF, kSceneF };

// Event F for event-only models and for the multitask model with beta < 1,
// scene F otherwise.
Selection selection_metric(ModelKind kind, double beta);
const char* selection_name(Selection s);

struct DevMetrics {
  std::optional<double> event_f;   // frame-level, threshold 0.5
  std::optional<double> event_er;
  std::optional<double> scene_f;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::uint64_t steps = 0;
  double loss_total = 0;  // means per clip over the epoch
  double loss_event = 0;
  double loss_scene = 0;
  DevMetrics dev;
  double selection = 0;
  bool best = false;
  double seconds = 0;
};

template <typename T>
struct TrainState {
  Network<T> net;
  Adam<T> opt;
  std::size_t epochs_done = 0;
  std::optional<double> best_score;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

template <typename T>
TrainState<T> init_train_state(Network<T> net, const TrainConfig& cfg);

template <typename T>
struct TrainCallbacks {
  // After every optimizer step (step counts from 1).
  std::function<void(std::uint64_t step, const Network<T>&)> on_step;
  // After every epoch, once the record is appended to the history.
  std::function<void(const TrainState<T>&, const EpochRecord&)> on_epoch;
};

// Mini-batch Adam over `cfg.epochs` epochs, continuing from
// state.epochs_done. Batch order depends only on (seed, epoch), so a resumed
// run replays the same batches. Throws ErrorCode::kNumeric on a non-finite loss.
template <typename T>
void train(TrainState<T>& state, std::span<const Example> train_set,
           std::span<const Example> dev_set, const TrainConfig& cfg,
           const TrainCallbacks<T>& callbacks = {});

struct ClipScores {
  Tensorf event_probs;              // [M, T]; empty without an event head
  std::vector<float> scene_probs;   // [N]; empty without a scene head
};

// Eval-mode inference in batches.
template <typename T>
std::vector<ClipScores> predict(const Network<T>& net, std::span<const Tensorf* const> features,
                                std::size_t batch_size = 8);

template <typename T>
DevMetrics dev_metrics(const Network<T>& net, std::span<const Example> dev_set,
                       std::size_t batch_size = 8);

// Index of the largest probability; ties keep the lowest index.
std::size_t argmax(std::span<const float> probs);

}  // namespace jsed

#endif  // JSED_TRAINING_HPP_
