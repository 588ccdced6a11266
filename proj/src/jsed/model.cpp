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

#include "jsed/model.hpp"

#include <cmath>
#include <sstream>

#include "jsed/binio.hpp"
#include "jsed/digest.hpp"
#include "jsed/rng.hpp"

namespace jsed {

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kProposed: return "proposed";
    case ModelKind::kCrnnEvent: return "crnn_event";
    case ModelKind::kCnnEvent: return "cnn_event";
    case ModelKind::kCnnScene: return "cnn_scene";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  for (auto k : {ModelKind::kProposed, ModelKind::kCrnnEvent, ModelKind::kCnnEvent,
                 ModelKind::kCnnScene}) {
    if (name == model_kind_name(k)) return k;
  }
  fail(ErrorCode::kConfig, "unknown model kind '" + name +
                               "' (expected proposed, crnn_event, cnn_event or "
                               "cnn_scene)");
}

const char* group_name(Group g) {
  switch (g) {
    case Group::kShared: return "shared";
    case Group::kEvent: return "event";
    case Group::kScene: return "scene";
  }
  return "unknown";
}

// ----------------------------------------------------------- ModelConfig

void ModelConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfig, what); };
  if (n_events == 0 || n_scenes == 0 || mel_bins == 0 || frames == 0) {
    bad("model dimensions must be positive");
  }
  if (shared.empty()) bad("shared trunk needs at least one conv block");
  if (gru_units == 0 || event_fc == 0 || scene_fc == 0) bad("layer widths must be positive");
  std::size_t f = mel_bins, t = frames;
  for (const auto& s : shared) {
    if (s.channels == 0 || s.pool.freq == 0 || s.pool.time == 0) bad("invalid shared conv spec");
    if (f % s.pool.freq || t % s.pool.time) {
      bad("shared pooling " + std::to_string(s.pool.freq) + "x" +
          std::to_string(s.pool.time) + " does not divide a " +
          std::to_string(f) + "x" + std::to_string(t) + " map");
    }
    f /= s.pool.freq;
    t /= s.pool.time;
  }
  if (t != frames) bad("shared pooling must not reduce time (event output is frame-aligned)");
  for (const auto& s : scene) {
    if (s.channels == 0 || s.pool.freq == 0 || s.pool.time == 0) bad("invalid scene conv spec");
    if (f % s.pool.freq || t % s.pool.time) {
      bad("scene pooling " + std::to_string(s.pool.freq) + "x" +
          std::to_string(s.pool.time) + " does not divide a " +
          std::to_string(f) + "x" + std::to_string(t) + " map");
    }
    f /= s.pool.freq;
    t /= s.pool.time;
  }
}

std::size_t ModelConfig::trunk_channels() const { return shared.back().channels; }

std::size_t ModelConfig::trunk_freq() const {
  std::size_t f = mel_bins;
  for (const auto& s : shared) f /= s.pool.freq;
  return f;
}

std::size_t ModelConfig::trunk_time() const {
  std::size_t t = frames;
  for (const auto& s : shared) t /= s.pool.time;
  return t;
}

std::size_t ModelConfig::scene_flat_width() const {
  std::size_t c = trunk_channels(), f = trunk_freq(), t = trunk_time();
  for (const auto& s : scene) {
    c = s.channels;
    f /= s.pool.freq;
    t /= s.pool.time;
  }
  return c * f * t;
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "M=" << n_events << ";N=" << n_scenes << ";D=" << mel_bins << ";T=" << frames
     << ";shared=";
  for (const auto& s : shared) os << s.channels << ':' << s.pool.freq << 'x' << s.pool.time << ',';
  os << ";scene=";
  for (const auto& s : scene) os << s.channels << ':' << s.pool.freq << 'x' << s.pool.time << ',';
  os << ";scene_fc=" << scene_fc << ";gru=" << gru_units << ";event_fc=" << event_fc;
  return os.str();
}

std::uint64_t config_digest(ModelKind kind, const ModelConfig& config) {
  return Fnv1a()
      .update(model_kind_name(kind))
      .update("|")
      .update(config.canonical())
      .value();
}

// --------------------------------------------------------------- Network

namespace {

template <typename Net, typename Fn>
void visit_state(Net& net, Fn&& fn, bool with_buffers) {
  auto block = [&](const std::string& p, auto& blk, Group g) {
    fn(p + ".conv.weight", g, blk.conv.weight);
    fn(p + ".conv.bias", g, blk.conv.bias);
    fn(p + ".bn.gamma", g, blk.bn.gamma);
    fn(p + ".bn.beta", g, blk.bn.beta);
    if (with_buffers) {
      fn(p + ".bn.running_mean", g, blk.bn.running_mean);
      fn(p + ".bn.running_var", g, blk.bn.running_var);
    }
  };
  auto gru = [&](const std::string& p, auto& gp) {
    fn(p + ".w", Group::kEvent, gp.w);
    fn(p + ".u", Group::kEvent, gp.u);
    fn(p + ".b_in", Group::kEvent, gp.b_in);
    fn(p + ".b_rec", Group::kEvent, gp.b_rec);
  };
  auto fc = [&](const std::string& p, auto& layer, Group g) {
    fn(p + ".weight", g, layer.weight);
    fn(p + ".bias", g, layer.bias);
  };
  for (std::size_t i = 0; i < net.shared().size(); ++i) {
    block("shared." + std::to_string(i), net.shared()[i], Group::kShared);
  }
  if (net.event()) {
    gru("event.gru_fwd", net.event()->gru_fwd);
    gru("event.gru_bwd", net.event()->gru_bwd);
    fc("event.fc", net.event()->fc, Group::kEvent);
    fc("event.out", net.event()->out, Group::kEvent);
  }
  if (net.frame_head()) fc("event.frame", *net.frame_head(), Group::kEvent);
  if (net.scene()) {
    for (std::size_t i = 0; i < net.scene()->blocks.size(); ++i) {
      block("scene." + std::to_string(i), net.scene()->blocks[i], Group::kScene);
    }
    fc("scene.fc", net.scene()->fc, Group::kScene);
    fc("scene.out", net.scene()->out, Group::kScene);
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
Tensor<T> to_batch4(const Tensor<T>& x, const ModelConfig& cfg) {
  Shape s = x.shape();
  if (s.size() == 3) s = {s[0], 1, s[1], s[2]};
  if (s.size() != 4 || s[1] != 1 || s[2] != cfg.mel_bins || s[3] != cfg.frames) {
    fail(ErrorCode::kShape, "model input " + shape_string(x.shape()) + " must be [B, " +
                                std::to_string(cfg.mel_bins) + ", " +
                                std::to_string(cfg.frames) + "]");
  }
  return x.reshaped(std::move(s));
}

template <typename T>
Tensor<T> run_block(const ConvBlock<T>& blk, Tensor<T> in, Mode mode,
                    BlockCache<T>* bc) {
  Tensor<T> act = relu(blk.conv.forward(in));
  typename BatchNorm<T>::Cache scratch;
  Tensor<T> normed = blk.bn.forward(act, mode, bc ? &bc->bn : &scratch);
  Tensor<T> out = maxpool2d(normed, blk.pool, bc ? &bc->pool : nullptr);
  if (bc) {
    bc->input = std::move(in);
    bc->activated = std::move(act);
  }
  return out;
}

template <typename T>
Tensor<T> block_backward(const ConvBlock<T>& blk, const BlockCache<T>& bc,
                         const Tensor<T>& grad_out, ConvBlock<T>& grad,
                         bool need_input_grad) {
  const Tensor<T> d_norm = maxpool2d_backward(bc.pool, grad_out);
  const Tensor<T> d_act = blk.bn.backward(bc.bn, d_norm, grad.bn);
  const Tensor<T> d_conv = relu_backward(bc.activated, d_act);
  return blk.conv.backward(bc.input, d_conv, grad.conv, need_input_grad);
}

// Per-frame trunk features, row (b*T + t), column d*C + c: frequency-major
// with channels adjacent within each frequency row.
template <typename T>
Tensor<T> trunk_rows(const Tensor<T>& trunk) {
  const std::size_t batch = trunk.dim(0), ch = trunk.dim(1), freq = trunk.dim(2),
                    steps = trunk.dim(3);
  Tensor<T> rows({batch * steps, ch * freq});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t d = 0; d < freq; ++d) {
        const T* src = trunk.data() + ((b * ch + c) * freq + d) * steps;
        for (std::size_t t = 0; t < steps; ++t) rows(b * steps + t, d * ch + c) = src[t];
      }
    }
  }
  return rows;
}

template <typename T>
void scatter_rows_add(const Tensor<T>& rows, Tensor<T>& d_trunk) {
  const std::size_t batch = d_trunk.dim(0), ch = d_trunk.dim(1), freq = d_trunk.dim(2),
                    steps = d_trunk.dim(3);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t d = 0; d < freq; ++d) {
        T* dst = d_trunk.data() + ((b * ch + c) * freq + d) * steps;
        for (std::size_t t = 0; t < steps; ++t) dst[t] += rows(b * steps + t, d * ch + c);
      }
    }
  }
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& m, std::size_t begin, std::size_t count) {
  const std::size_t w = m.dim(1);
  std::vector<T> v(m.data() + begin * w, m.data() + (begin + count) * w);
  return Tensor<T>({count, w}, std::move(v));
}

}  // namespace

template <typename T>
Network<T> Network<T>::build(ModelKind kind, const ModelConfig& config,
                             std::uint64_t seed) {
  config.validate();
  Network net;
  net.kind_ = kind;
  net.config_ = config;
  std::size_t in = 1;
  for (const auto& spec : config.shared) {
    net.shared_.push_back({Conv2d<T>::zeros(in, spec.channels),
                           BatchNorm<T>::identity(spec.channels), spec.pool});
    in = spec.channels;
  }
  const std::size_t width = config.trunk_frame_width();
  if (kind == ModelKind::kProposed || kind == ModelKind::kCrnnEvent) {
    const std::size_t h = config.gru_units;
    net.event_ = EventBranch<T>{GruParams<T>::zeros(width, h),
                                GruParams<T>::zeros(width, h),
                                Fc<T>::zeros(2 * h, config.event_fc),
                                Fc<T>::zeros(config.event_fc, config.n_events)};
  }
  if (kind == ModelKind::kCnnEvent) {
    net.frame_head_ = Fc<T>::zeros(width, config.n_events);
  }
  if (kind == ModelKind::kProposed || kind == ModelKind::kCnnScene) {
    SceneBranch<T> sb;
    in = config.trunk_channels();
    for (const auto& spec : config.scene) {
      sb.blocks.push_back({Conv2d<T>::zeros(in, spec.channels),
                           BatchNorm<T>::identity(spec.channels), spec.pool});
      in = spec.channels;
    }
    sb.fc = Fc<T>::zeros(config.scene_flat_width(), config.scene_fc);
    sb.out = Fc<T>::zeros(config.scene_fc, config.n_scenes);
    net.scene_ = std::move(sb);
  }
  const Rng root(seed);
  net.for_each_param([&](const std::string& name, Group, Tensor<T>& t) {
    if (ends_with(name, ".weight") || ends_with(name, ".w") || ends_with(name, ".u")) {
      Rng stream = root.split(name);
      t = glorot_init<T>(t.shape(), stream);
    }
  });
  return net;
}

template <typename T>
Network<T> Network<T>::zeros_like(const Network& other) {
  Network net = other;
  net.for_each_state([](const std::string&, Group, Tensor<T>& t) { t.fill(T(0)); });
  return net;
}

template <typename T>
void Network<T>::for_each_param(const ParamVisitor& fn) {
  visit_state(*this, fn, false);
}
template <typename T>
void Network<T>::for_each_param(const ConstParamVisitor& fn) const {
  visit_state(*this, fn, false);
}
template <typename T>
void Network<T>::for_each_state(const ParamVisitor& fn) {
  visit_state(*this, fn, true);
}
template <typename T>
void Network<T>::for_each_state(const ConstParamVisitor& fn) const {
  visit_state(*this, fn, true);
}

template <typename T>
std::size_t Network<T>::count_params(unsigned group_mask) const {
  std::size_t n = 0;
  for_each_param([&](const std::string&, Group g, const Tensor<T>& t) {
    if (group_mask & static_cast<unsigned>(g)) n += t.size();
  });
  return n;
}

template <typename T>
ForwardResult<T> Network<T>::forward(const Tensor<T>& x, Mode mode,
                                     ForwardCache<T>* cache) const {
  Tensor<T> h = to_batch4(x, config_);
  const std::size_t batch = h.dim(0), steps = config_.frames;
  if (cache) {
    *cache = ForwardCache<T>{};
    cache->mode = mode;
    cache->shared.resize(shared_.size());
  }
  for (std::size_t i = 0; i < shared_.size(); ++i) {
    h = run_block(shared_[i], std::move(h), mode, cache ? &cache->shared[i] : nullptr);
  }
  ForwardResult<T> result;

  if (has_event_head()) {
    Tensor<T> logits;
    if (event_) {
      const Tensor<T> rows = trunk_rows(h);
      const std::size_t hid = 2 * config_.gru_units;
      Tensor<T> states({batch * steps, hid});
      if (cache) cache->gru.resize(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const Tensor<T> hb = bigru(slice_rows(rows, b * steps, steps), event_->gru_fwd,
                                   event_->gru_bwd, cache ? &cache->gru[b] : nullptr);
        std::copy_n(hb.data(), hb.size(), states.data() + b * steps * hid);
      }
      Tensor<T> hidden = relu(event_->fc.forward(states));
      logits = event_->out.forward(hidden);
      if (cache) {
        cache->event_in = std::move(states);
        cache->event_hidden = std::move(hidden);
      }
    } else {
      Tensor<T> rows = trunk_rows(h);
      logits = frame_head_->forward(rows);
      if (cache) cache->event_in = std::move(rows);
    }
    const std::size_t m_events = config_.n_events;
    result.event_probs = Tensor<T>({batch, m_events, steps});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t m = 0; m < m_events; ++m) {
          result.event_probs(b, m, t) =
              T(1) / (T(1) + std::exp(-logits(b * steps + t, m)));
        }
      }
    }
  }

  if (scene_) {
    Tensor<T> s = h;
    if (cache) cache->scene.resize(scene_->blocks.size());
    for (std::size_t i = 0; i < scene_->blocks.size(); ++i) {
      s = run_block(scene_->blocks[i], std::move(s), mode,
                    cache ? &cache->scene[i] : nullptr);
    }
    const Shape out_shape = s.shape();
    Tensor<T> flat = s.reshaped({batch, s.size() / batch});
    Tensor<T> hidden = relu(scene_->fc.forward(flat));
    const Tensor<T> logits = scene_->out.forward(hidden);
    result.scene_probs = Tensor<T>({batch, config_.n_scenes});
    for (std::size_t b = 0; b < batch; ++b) {
      const auto p = softmax<T>(std::span<const T>(logits.data() + b * config_.n_scenes,
                                                   config_.n_scenes));
      std::copy(p.begin(), p.end(), result.scene_probs.data() + b * config_.n_scenes);
    }
    if (cache) {
      cache->scene_out_shape = out_shape;
      cache->scene_flat = std::move(flat);
      cache->scene_hidden = std::move(hidden);
    }
  }
  if (cache) cache->trunk = std::move(h);
  return result;
}

template <typename T>
void Network<T>::backward(const ForwardCache<T>& cache, const Tensor<T>* d_event_logits,
                          const Tensor<T>* d_scene_logits, Network& grads) const {
  if (cache.trunk.empty()) fail(ErrorCode::kInvalidArgument, "backward: missing forward cache");
  const std::size_t batch = cache.trunk.dim(0), steps = config_.frames;
  Tensor<T> d_trunk(cache.trunk.shape());

  if (d_event_logits && has_event_head()) {
    const std::size_t m_events = config_.n_events;
    if (d_event_logits->shape() != Shape{batch, m_events, steps}) {
      fail(ErrorCode::kShape, "backward: event gradient must be [B, M, T]");
    }
    Tensor<T> d_logits({batch * steps, m_events});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t m = 0; m < m_events; ++m) {
        for (std::size_t t = 0; t < steps; ++t) {
          d_logits(b * steps + t, m) = (*d_event_logits)(b, m, t);
        }
      }
    }
    if (event_) {
      const Tensor<T> d_hidden =
          event_->out.backward(cache.event_hidden, d_logits, grads.event_->out, true);
      const Tensor<T> d_pre = relu_backward(cache.event_hidden, d_hidden);
      const Tensor<T> d_states =
          event_->fc.backward(cache.event_in, d_pre, grads.event_->fc, true);
      Tensor<T> d_rows({batch * steps, config_.trunk_frame_width()});
      for (std::size_t b = 0; b < batch; ++b) {
        const Tensor<T> d_seq = bigru_backward(
            event_->gru_fwd, event_->gru_bwd, cache.gru.at(b),
            slice_rows(d_states, b * steps, steps), grads.event_->gru_fwd,
            grads.event_->gru_bwd);
        std::copy_n(d_seq.data(), d_seq.size(), d_rows.data() + b * d_seq.size());
      }
      scatter_rows_add(d_rows, d_trunk);
    } else {
      const Tensor<T> d_rows =
          frame_head_->backward(cache.event_in, d_logits, *grads.frame_head_, true);
      scatter_rows_add(d_rows, d_trunk);
    }
  }

  if (d_scene_logits && scene_) {
    if (d_scene_logits->shape() != Shape{batch, config_.n_scenes}) {
      fail(ErrorCode::kShape, "backward: scene gradient must be [B, N]");
    }
    const Tensor<T> d_hidden =
        scene_->out.backward(cache.scene_hidden, *d_scene_logits, grads.scene_->out, true);
    const Tensor<T> d_pre = relu_backward(cache.scene_hidden, d_hidden);
    Tensor<T> d = scene_->fc.backward(cache.scene_flat, d_pre, grads.scene_->fc, true)
                      .reshaped(cache.scene_out_shape);
    for (std::size_t i = scene_->blocks.size(); i-- > 0;) {
      d = block_backward(scene_->blocks[i], cache.scene.at(i), d,
                         grads.scene_->blocks[i], true);
    }
    for (std::size_t i = 0; i < d.size(); ++i) d_trunk[i] += d[i];
  }

  Tensor<T> d = std::move(d_trunk);
  for (std::size_t i = shared_.size(); i-- > 0;) {
    d = block_backward(shared_[i], cache.shared.at(i), d, grads.shared_[i], i > 0);
  }
}

template <typename T>
void Network<T>::update_batch_stats(const ForwardCache<T>& cache) {
  if (cache.mode != Mode::kTrain) return;
  for (std::size_t i = 0; i < shared_.size() && i < cache.shared.size(); ++i) {
    shared_[i].bn.update_running_stats(cache.shared[i].bn);
  }
  if (scene_) {
    for (std::size_t i = 0; i < scene_->blocks.size() && i < cache.scene.size(); ++i) {
      scene_->blocks[i].bn.update_running_stats(cache.scene[i].bn);
    }
  }
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out = Network<U>::build(kind_, config_, 0);
  std::map<std::string, const Tensor<T>*> src;
  for_each_state([&](const std::string& name, Group, const Tensor<T>& t) { src[name] = &t; });
  out.for_each_state([&](const std::string& name, Group, Tensor<U>& t) {
    t = src.at(name)->template cast<U>();
  });
  return out;
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;

// ------------------------------------------------------------ checkpoint

namespace {
constexpr char kCheckpointMagic[5] = {'J', 'S', 'C', 'K', '1'};
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  binio::Writer w;
  w.bytes(kCheckpointMagic, 5);
  w.le<std::uint64_t>(ckpt.digest);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.meta.size()));
  w.bytes(ckpt.meta.data(), ckpt.meta.size());
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.le<std::uint64_t>(d);
    for (float v : t.values()) w.f32(v);
  }
  w.save(path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  binio::Reader rd(bytes, path.string());
  char magic[5];
  rd.bytes(magic, 5);
  require(std::equal(magic, magic + 5, kCheckpointMagic), ErrorCode::kFormat,
          path.string() + ": not a JSCK1 checkpoint");
  Checkpoint ckpt;
  ckpt.digest = rd.le<std::uint64_t>();
  ckpt.meta.resize(rd.le<std::uint32_t>());
  rd.bytes(ckpt.meta.data(), ckpt.meta.size());
  const auto count = rd.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(rd.le<std::uint32_t>(), '\0');
    rd.bytes(name.data(), name.size());
    Shape shape(rd.le<std::uint32_t>());
    for (auto& d : shape) d = rd.le<std::uint64_t>();
    Tensorf t(shape);
    require(rd.remaining() >= t.size() * 4, ErrorCode::kFormat,
            path.string() + ": truncated tensor " + name);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = rd.f32();
    ckpt.tensors.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

void export_state(const Network<float>& net, std::map<std::string, Tensorf>& out,
                  const std::string& prefix) {
  net.for_each_state(
      [&](const std::string& name, Group, const Tensorf& t) { out[prefix + name] = t; });
}

void import_state(Network<float>& net, const std::map<std::string, Tensorf>& in,
                  const std::string& prefix) {
  net.for_each_state([&](const std::string& name, Group, Tensorf& t) {
    auto it = in.find(prefix + name);
    require(it != in.end(), ErrorCode::kFormat, "checkpoint lacks tensor " + prefix + name);
    require(it->second.shape() == t.shape(), ErrorCode::kFormat,
            "checkpoint tensor " + prefix + name + " has shape " +
                shape_string(it->second.shape()) + ", expected " + shape_string(t.shape()));
    t = it->second;
  });
}

Network<float> load_network(const std::filesystem::path& path, ModelKind kind,
                            const ModelConfig& config, Checkpoint* raw) {
  Checkpoint ckpt = read_checkpoint(path);
  const std::uint64_t expected = config_digest(kind, config);
  if (ckpt.digest != expected) {
    fail(ErrorCode::kFormat, path.string() + ": checkpoint config digest does not match (" +
                                 model_kind_name(kind) + ", " + config.canonical() + ")");
  }
  Network<float> net = Network<float>::build(kind, config, 0);
  import_state(net, ckpt.tensors);
  if (raw) *raw = std::move(ckpt);
  return net;
}

}  // namespace jsed
