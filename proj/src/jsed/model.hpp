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

#ifndef JSED_MODEL_HPP_
#define JSED_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jsed/layers.hpp"

namespace jsed {

enum class ModelKind { kProposed, kCrnnEvent, kCnnEvent, kCnnScene };

const char* model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Parameter groups; used as bit flags in group masks.
enum class Group : unsigned { kShared = 1, kEvent = 2, kScene = 4 };
constexpr unsigned kAllGroups = 7;
const char* group_name(Group g);

struct ConvSpec {
  std::size_t channels = 0;
  PoolSize pool;
};

struct ModelConfig {
  std::size_t n_events = 25;
  std::size_t n_scenes = 4;
  std::size_t mel_bins = 64;
  std::size_t frames = 500;
  std::vector<ConvSpec> shared = {{128, {8, 1}}, {128, {2, 1}}, {128, {2, 1}}};
  std::vector<ConvSpec> scene = {{256, {1, 25}}, {256, {1, 20}}};
  std::size_t scene_fc = 32;
  std::size_t gru_units = 32;
  std::size_t event_fc = 32;

  // Throws ErrorCode::kConfig when the pooling arithmetic does not divide.
  void validate() const;

  std::size_t trunk_channels() const;
  std::size_t trunk_freq() const;
  std::size_t trunk_time() const;
  // Per-frame feature width fed to the recurrent layer (channels x freq).
  std::size_t trunk_frame_width() const { return trunk_channels() * trunk_freq(); }
  std::size_t scene_flat_width() const;

  std::string canonical() const;
};

std::uint64_t config_digest(ModelKind kind, const ModelConfig& config);

template <typename T>
struct ConvBlock {
  Conv2d<T> conv;
  BatchNorm<T> bn;
  PoolSize pool;
};

template <typename T>
struct EventBranch {
  GruParams<T> gru_fwd;
  GruParams<T> gru_bwd;
  Fc<T> fc;   // 2H -> event_fc
  Fc<T> out;  // event_fc -> M
};

template <typename T>
struct SceneBranch {
  std::vector<ConvBlock<T>> blocks;
  Fc<T> fc;   // flat -> scene_fc
  Fc<T> out;  // scene_fc -> N
};

template <typename T>
struct BlockCache {
  Tensor<T> input;
  Tensor<T> activated;  // ReLU output, BN input
  typename BatchNorm<T>::Cache bn;
  MaxPoolCache pool;
};

template <typename T>
struct ForwardCache {
  Mode mode = Mode::kTrain;
  std::vector<BlockCache<T>> shared;
  Tensor<T> trunk;  // [B, C, F', T]
  // Event path, B*T rows.
  std::vector<BiGruCache<T>> gru;
  Tensor<T> event_in;      // [B*T, 2H] or [B*T, C*F'] for the CNN event head
  Tensor<T> event_hidden;  // [B*T, event_fc] post-ReLU
  // Scene path.
  std::vector<BlockCache<T>> scene;
  Shape scene_out_shape;   // last scene block output [B, C, F, T]
  Tensor<T> scene_flat;    // [B, flat]
  Tensor<T> scene_hidden;  // [B, scene_fc] post-ReLU
};

template <typename T>
struct ForwardResult {
  Tensor<T> event_probs;  // [B, M, T], empty without an event head
  Tensor<T> scene_probs;  // [B, N], empty without a scene head
};

// Shared trunk: conv -> ReLU -> BN -> max pool per block. Event branch:
// BiGRU -> FC -> ReLU -> FC -> sigmoid per frame. Scene branch: conv blocks
// -> flatten -> FC -> ReLU -> FC -> softmax.
template <typename T>
class Network {
 public:
  using ParamVisitor = std::function<void(const std::string&, Group, Tensor<T>&)>;
  using ConstParamVisitor =
      std::function<void(const std::string&, Group, const Tensor<T>&)>;

  // Weights Glorot-uniform, biases zero, BN gamma 1 / beta 0. Each tensor
  // draws from its own stream keyed by (seed, name), so a shared or event
  // tensor is identical across model kinds built from the same seed.
  static Network build(ModelKind kind, const ModelConfig& config,
                       std::uint64_t seed);
  // Same structure, every tensor zero.
  static Network zeros_like(const Network& other);

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  bool has_event_head() const { return event_.has_value() || frame_head_.has_value(); }
  bool has_scene_head() const { return scene_.has_value(); }

  // Learnable tensors, fixed order.
  void for_each_param(const ParamVisitor& fn);
  void for_each_param(const ConstParamVisitor& fn) const;
  // Learnable tensors plus BN running statistics.
  void for_each_state(const ParamVisitor& fn);
  void for_each_state(const ConstParamVisitor& fn) const;

  std::size_t count_params(unsigned group_mask = kAllGroups) const;

  // x: [B, D, T] or [B, 1, D, T].
  ForwardResult<T> forward(const Tensor<T>& x, Mode mode,
                           ForwardCache<T>* cache = nullptr) const;
  // Gradients w.r.t. the pre-sigmoid event logits ([B, M, T]) and pre-softmax
  // scene logits ([B, N]); either may be null. Accumulates into `grads`.
  void backward(const ForwardCache<T>& cache, const Tensor<T>* d_event_logits,
                const Tensor<T>* d_scene_logits, Network& grads) const;

  void update_batch_stats(const ForwardCache<T>& cache);

  std::vector<ConvBlock<T>>& shared() { return shared_; }
  const std::vector<ConvBlock<T>>& shared() const { return shared_; }
  std::optional<EventBranch<T>>& event() { return event_; }
  const std::optional<EventBranch<T>>& event() const { return event_; }
  std::optional<Fc<T>>& frame_head() { return frame_head_; }
  const std::optional<Fc<T>>& frame_head() const { return frame_head_; }
  std::optional<SceneBranch<T>>& scene() { return scene_; }
  const std::optional<SceneBranch<T>>& scene() const { return scene_; }

  template <typename U>
  Network<U> cast() const;

 private:
  template <typename U>
  friend class Network;

  ModelKind kind_ = ModelKind::kProposed;
  ModelConfig config_;
  std::vector<ConvBlock<T>> shared_;
  std::optional<EventBranch<T>> event_;
  std::optional<Fc<T>> frame_head_;
  std::optional<SceneBranch<T>> scene_;
};

// Checkpoint file: "JSCK1", u64 config digest, u32 meta length + JSON meta
// text, u32 tensor count, then per tensor: u32 name length, name, u32 rank,
// u64 extents, float32 payload. All integers little-endian.
struct Checkpoint {
  std::uint64_t digest = 0;
  std::string meta;  // JSON document
  std::map<std::string, Tensorf> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Model state (params + BN statistics) to/from a tensor table.
void export_state(const Network<float>& net, std::map<std::string, Tensorf>& out,
                  const std::string& prefix = "");
void import_state(Network<float>& net, const std::map<std::string, Tensorf>& in,
                  const std::string& prefix = "");

// Rejects a checkpoint whose digest does not match (kind, config).
Network<float> load_network(const std::filesystem::path& path, ModelKind kind,
                            const ModelConfig& config, Checkpoint* raw = nullptr);

}  // namespace jsed

#endif  // JSED_MODEL_HPP_
