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

#include "jsed/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jsed/digest.hpp"

namespace jsed {

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

template <typename T>
double event_loss(const Tensor<T>& probs, const EventRoll& target) {
  require(probs.rank() == 2 && probs.dim(0) == target.events() &&
              probs.dim(1) == target.frames(),
          ErrorCode::kShape, "event_loss: probabilities " + shape_string(probs.shape()) +
                                 " do not match the target roll");
  double loss = 0;
  for (std::size_t m = 0; m < target.events(); ++m) {
    for (std::size_t t = 0; t < target.frames(); ++t) {
      const double y = clamp_prob(static_cast<double>(probs(m, t)));
      loss -= target(m, t) ? std::log(y) : std::log(1.0 - y);
    }
  }
  return loss;
}

template <typename T>
double scene_loss(std::span<const T> probs, std::size_t target) {
  require(target < probs.size(), ErrorCode::kInvalidArgument,
          "scene_loss: target index out of range");
  return -std::log(clamp_prob(static_cast<double>(probs[target])));
}

LossWeights effective_weights(ModelKind kind, const LossWeights& w) {
  switch (kind) {
    case ModelKind::kProposed: return w;
    case ModelKind::kCrnnEvent:
    case ModelKind::kCnnEvent: return {w.alpha, 0.0};
    case ModelKind::kCnnScene: return {0.0, 1.0};
  }
  return w;
}

template <typename T>
BatchObjective<T> batch_objective(const ForwardResult<T>& out,
                                  std::span<const EventRoll* const> rolls,
                                  std::span<const std::size_t> scenes,
                                  const LossWeights& w, bool with_grad) {
  BatchObjective<T> obj;
  if (!out.event_probs.empty()) {
    const std::size_t batch = out.event_probs.dim(0), m_events = out.event_probs.dim(1),
                      steps = out.event_probs.dim(2);
    require(rolls.size() == batch, ErrorCode::kInvalidArgument,
            "batch_objective: need one event roll per clip");
    if (with_grad && w.alpha != 0) obj.d_event_logits = Tensor<T>(out.event_probs.shape());
    for (std::size_t b = 0; b < batch; ++b) {
      const EventRoll& z = *rolls[b];
      require(z.events() == m_events && z.frames() == steps, ErrorCode::kShape,
              "batch_objective: target roll shape mismatch");
      for (std::size_t m = 0; m < m_events; ++m) {
        for (std::size_t t = 0; t < steps; ++t) {
          const double y = static_cast<double>(out.event_probs(b, m, t));
          const double yc = clamp_prob(y);
          const bool on = z(m, t) != 0;
          obj.event -= on ? std::log(yc) : std::log(1.0 - yc);
          if (!obj.d_event_logits.empty()) {
            obj.d_event_logits(b, m, t) = static_cast<T>(w.alpha * (y - (on ? 1.0 : 0.0)));
          }
        }
      }
    }
  }
  if (!out.scene_probs.empty()) {
    const std::size_t batch = out.scene_probs.dim(0), n_scenes = out.scene_probs.dim(1);
    require(scenes.size() == batch, ErrorCode::kInvalidArgument,
            "batch_objective: need one scene label per clip");
    if (with_grad && w.beta != 0) obj.d_scene_logits = Tensor<T>(out.scene_probs.shape());
    for (std::size_t b = 0; b < batch; ++b) {
      const std::span<const T> p(out.scene_probs.data() + b * n_scenes, n_scenes);
      obj.scene += scene_loss<T>(p, scenes[b]);
      if (!obj.d_scene_logits.empty()) {
        for (std::size_t n = 0; n < n_scenes; ++n) {
          const double onehot = n == scenes[b] ? 1.0 : 0.0;
          obj.d_scene_logits(b, n) =
              static_cast<T>(w.beta * (static_cast<double>(p[n]) - onehot));
        }
      }
    }
  }
  obj.total = mtl_loss(obj.event, obj.scene, w);
  return obj;
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m,
                 std::span<T> v, std::uint64_t step, const AdamConfig& cfg) {
  require(param.size() == grad.size() && m.size() == param.size() &&
              v.size() == param.size(),
          ErrorCode::kShape, "adam_update: size mismatch");
  require(step >= 1, ErrorCode::kInvalidArgument, "adam_update: step counts from 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double update = cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
    param[i] = static_cast<T>(param[i] - update);
  }
}

template <typename T>
Adam<T>::Adam(const Network<T>& net, const AdamConfig& cfg) : cfg_(cfg) {
  net.for_each_param([&](const std::string& name, Group, const Tensor<T>& t) {
    names_.push_back(name);
    m_.emplace_back(t.shape());
    v_.emplace_back(t.shape());
  });
}

template <typename T>
void Adam<T>::step(Network<T>& net, const Network<T>& grads) {
  std::vector<const Tensor<T>*> g;
  grads.for_each_param([&](const std::string&, Group, const Tensor<T>& t) { g.push_back(&t); });
  require(g.size() == m_.size(), ErrorCode::kInternal, "Adam: parameter list changed");
  ++steps_;
  std::size_t i = 0;
  net.for_each_param([&](const std::string&, Group, Tensor<T>& p) {
    adam_update<T>(p.values(), g[i]->values(), m_[i].values(), v_[i].values(), steps_, cfg_);
    ++i;
  });
}

template <typename T>
void Adam<T>::export_state(std::map<std::string, Tensorf>& out) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out["adam.m." + names_[i]] = m_[i].template cast<float>();
    out["adam.v." + names_[i]] = v_[i].template cast<float>();
  }
  out["adam.step"] = Tensorf({2}, {static_cast<float>(steps_ & 0xffffff),
                                   static_cast<float>(steps_ >> 24)});
}

template <typename T>
void Adam<T>::import_state(const std::map<std::string, Tensorf>& in) {
  auto get = [&](const std::string& key, const Shape& shape) -> const Tensorf& {
    auto it = in.find(key);
    require(it != in.end(), ErrorCode::kFormat, "checkpoint lacks optimizer tensor " + key);
    require(it->second.shape() == shape, ErrorCode::kFormat,
            "optimizer tensor " + key + " has the wrong shape");
    return it->second;
  };
  for (std::size_t i = 0; i < names_.size(); ++i) {
    m_[i] = get("adam.m." + names_[i], m_[i].shape()).template cast<T>();
    v_[i] = get("adam.v." + names_[i], v_[i].shape()).template cast<T>();
  }
  const Tensorf& s = get("adam.step", {2});
  steps_ = static_cast<std::uint64_t>(s[0]) | (static_cast<std::uint64_t>(s[1]) << 24);
}

double relative_error(double analytic, double numeric) {
  const double den = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / den;
}

Network<double> analytic_gradients(const Network<double>& net, const Tensord& x,
                                   std::span<const EventRoll* const> rolls,
                                   std::span<const std::size_t> scenes,
                                   const LossWeights& w) {
  ForwardCache<double> cache;
  const auto out = net.forward(x, Mode::kTrain, &cache);
  const auto obj = batch_objective(out, rolls, scenes, w, true);
  Network<double> grads = Network<double>::zeros_like(net);
  net.backward(cache, obj.d_event_logits.empty() ? nullptr : &obj.d_event_logits,
               obj.d_scene_logits.empty() ? nullptr : &obj.d_scene_logits, grads);
  return grads;
}

namespace {

// Fingerprint of every piecewise decision in a forward pass: ReLU masks and
// max-pool winners. Equal fingerprints mean the loss is smooth between the
// two parameter points.
std::uint64_t switch_signature(const ForwardCache<double>& c) {
  Fnv1a h;
  auto mask = [&](const Tensord& t) {
    for (double v : t.values()) {
      const unsigned char on = v > 0;
      h.update(&on, 1);
    }
  };
  auto blocks = [&](const std::vector<BlockCache<double>>& bs) {
    for (const auto& b : bs) {
      mask(b.activated);
      h.update(b.pool.argmax.data(), b.pool.argmax.size() * sizeof(b.pool.argmax[0]));
    }
  };
  blocks(c.shared);
  blocks(c.scene);
  mask(c.event_hidden);
  mask(c.scene_hidden);
  return h.value();
}

// Per-element loss terms (unweighted). Differencing term by term before
// summing keeps the stencil from inheriting the rounding of a large total.
// Relative rounding error assumed per loss evaluation, in units of eps.
constexpr double kRoundingSlack = 2.0;

struct Probe {
  std::vector<double> event;
  std::vector<double> scene;
  std::uint64_t signature = 0;
};

Probe evaluate(const Network<double>& net, const Tensord& x,
               std::span<const EventRoll* const> rolls, std::span<const std::size_t> scenes) {
  ForwardCache<double> cache;
  const auto out = net.forward(x, Mode::kTrain, &cache);
  Probe p;
  p.signature = switch_signature(cache);
  if (!out.event_probs.empty()) {
    const std::size_t batch = out.event_probs.dim(0), m_events = out.event_probs.dim(1),
                      steps = out.event_probs.dim(2);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t m = 0; m < m_events; ++m) {
        for (std::size_t t = 0; t < steps; ++t) {
          const double y = clamp_prob(out.event_probs(b, m, t));
          p.event.push_back((*rolls[b])(m, t) ? -std::log(y) : -std::log(1.0 - y));
        }
      }
    }
  }
  if (!out.scene_probs.empty()) {
    const std::size_t n_scenes = out.scene_probs.dim(1);
    for (std::size_t b = 0; b < out.scene_probs.dim(0); ++b) {
      p.scene.push_back(scene_loss<double>(
          std::span<const double>(out.scene_probs.data() + b * n_scenes, n_scenes),
          scenes[b]));
    }
  }
  return p;
}

}  // namespace

GradCheckReport grad_check_full(const Network<double>& net, const Tensord& x,
                                std::span<const EventRoll* const> rolls,
                                std::span<const std::size_t> scenes,
                                const LossWeights& w, const GradCheckOptions& opts) {
  const LossWeights eff = effective_weights(net.kind(), w);
  const Network<double> grads = analytic_gradients(net, x, rolls, scenes, eff);
  std::vector<const Tensord*> analytic;
  grads.for_each_param(
      [&](const std::string&, Group, const Tensord& t) { analytic.push_back(&t); });

  Network<double> probe = net;
  const std::uint64_t base = evaluate(probe, x, rolls, scenes).signature;
  GradCheckReport rep;
  std::size_t k = 0;
  probe.for_each_param([&](const std::string& name, Group g, Tensord& p) {
    const Tensord& a = *analytic[k++];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      double h = opts.step;
      bool smooth = false;
      double numeric = 0, resolution = 0;
      for (int attempt = 0; attempt <= opts.max_shrinks; ++attempt) {
        Probe at[4];
        const double offsets[4] = {2 * h, h, -h, -2 * h};
        bool same = true;
        for (int j = 0; j < 4; ++j) {
          p[i] = orig + offsets[j];
          at[j] = evaluate(probe, x, rolls, scenes);
          same = same && at[j].signature == base;
        }
        p[i] = orig;
        if (same) {
          // Five-point central stencil, fourth-order accurate.
          auto d = [&](std::vector<double> Probe::*term) {
            double sum = 0;
            for (std::size_t e = 0; e < (at[0].*term).size(); ++e) {
              sum += ((at[3].*term)[e] - (at[0].*term)[e]) +
                     8 * ((at[1].*term)[e] - (at[2].*term)[e]);
            }
            return sum / (12 * h);
          };
          numeric = eff.alpha * d(&Probe::event) + eff.beta * d(&Probe::scene);
          // Rounding in the four loss evaluations limits what the quotient
          // can resolve; 1.5 is the stencil's coefficient sum over 12.
          // A term that no probe moved contributes no rounding noise.
          auto magnitude = [&](std::vector<double> Probe::*term) {
            double m = 0;
            if (at[0].*term == at[1].*term && at[0].*term == at[2].*term &&
                at[0].*term == at[3].*term) {
              return 0.0;
            }
            for (const auto& q : at) {
              double s = 0;
              for (double v : q.*term) s += std::abs(v);
              m = std::max(m, s);
            }
            return m;
          };
          resolution = 1.5 * kRoundingSlack * std::numeric_limits<double>::epsilon() *
                       (std::abs(eff.alpha) * magnitude(&Probe::event) +
                        std::abs(eff.beta) * magnitude(&Probe::scene)) / h;
          smooth = true;
          if (attempt > 0) ++rep.shrunk;
          break;
        }
        h *= 0.1;
      }
      if (!smooth) {
        ++rep.skipped;
        continue;
      }
      ++rep.checked;
      const double gap = std::abs(a[i] - numeric);
      if (gap <= resolution) ++rep.at_resolution;
      const double den = std::max({std::abs(a[i]), std::abs(numeric), 1e-8});
      const double err = std::max(0.0, gap - resolution) / den;
      rep.max_raw_rel_error = std::max(rep.max_raw_rel_error, gap / den);
      auto& group_max = rep.max_rel_error_by_group[group_name(g)];
      group_max = std::max(group_max, err);
      if (rep.checked == 1 || err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_param = name;
        rep.worst_index = i;
        rep.worst_analytic = a[i];
        rep.worst_numeric = numeric;
      }
    }
  });
  return rep;
}

template double event_loss<float>(const Tensor<float>&, const EventRoll&);
template double event_loss<double>(const Tensor<double>&, const EventRoll&);
template double scene_loss<float>(std::span<const float>, std::size_t);
template double scene_loss<double>(std::span<const double>, std::size_t);
template BatchObjective<float> batch_objective<float>(const ForwardResult<float>&,
                                                      std::span<const EventRoll* const>,
                                                      std::span<const std::size_t>,
                                                      const LossWeights&, bool);
template BatchObjective<double> batch_objective<double>(const ForwardResult<double>&,
                                                        std::span<const EventRoll* const>,
                                                        std::span<const std::size_t>,
                                                        const LossWeights&, bool);
template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, std::uint64_t, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>,
                                  std::span<double>, std::span<double>, std::uint64_t,
                                  const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace jsed
