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

#include "jsed/run_config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <sstream>

#include "jsed/binio.hpp"
#include "jsed/digest.hpp"

namespace jsed {

namespace {

enum class Kind { kString, kPath, kInt, kReal, kBool, kStrings, kInts, kReals, kPools, kKinds };

struct KeySpec {
  const char* key;
  const char* fallback;
  Kind kind;
};

// The full key set. Defaults describe the reference network and training
// setup; data-dependent sizes default to 0 ("take from the data").
const KeySpec kKeys[] = {
    {"seed", "1", Kind::kInt},
    {"manifest", "", Kind::kPath},
    {"vocab.scenes", "", Kind::kStrings},
    {"vocab.events", "", Kind::kStrings},
    {"split.ratios", "0.6, 0.2, 0.2", Kind::kReals},

    {"feature.frame_ms", "40", Kind::kReal},
    {"feature.hop_ms", "20", Kind::kReal},
    {"feature.n_mels", "64", Kind::kInt},
    {"feature.log_floor", "1e-10", Kind::kReal},
    {"feature.pad_to_hop_grid", "true", Kind::kBool},

    {"model.n_events", "0", Kind::kInt},
    {"model.n_scenes", "0", Kind::kInt},
    {"model.mel_bins", "0", Kind::kInt},
    {"model.frames", "0", Kind::kInt},
    {"model.shared_channels", "128, 128, 128", Kind::kInts},
    {"model.shared_pools", "8x1, 2x1, 2x1", Kind::kPools},
    {"model.scene_channels", "256, 256", Kind::kInts},
    {"model.scene_pools", "1x25, 1x20", Kind::kPools},
    {"model.scene_fc", "32", Kind::kInt},
    {"model.gru_units", "32", Kind::kInt},
    {"model.event_fc", "32", Kind::kInt},

    {"train.methods", "proposed", Kind::kKinds},
    {"train.betas", "0.01", Kind::kReals},
    {"train.seeds", "1", Kind::kInts},
    {"train.alpha", "1", Kind::kReal},
    {"train.lr", "0.001", Kind::kReal},
    {"train.adam_beta1", "0.9", Kind::kReal},
    {"train.adam_beta2", "0.999", Kind::kReal},
    {"train.adam_eps", "1e-08", Kind::kReal},
    {"train.batch_size", "8", Kind::kInt},
    {"train.epochs", "30", Kind::kInt},
    {"train.max_steps", "0", Kind::kInt},

    {"eval.segment_frames", "1", Kind::kInt},

    {"synth.clips", "200", Kind::kInt},
    {"synth.seconds", "10", Kind::kReal},
    {"synth.sample_rate", "44100", Kind::kReal},
    {"synth.audio", "false", Kind::kBool},
    {"synth.scenes", "city_center, home, office, residential_area", Kind::kStrings},
    {"synth.n_events", "10", Kind::kInt},
    {"synth.p_primary", "0.35", Kind::kReal},
    {"synth.p_other", "0.02", Kind::kReal},
    {"synth.mean_event_s", "1", Kind::kReal},
    {"synth.event_gain", "3", Kind::kReal},
    {"synth.noise_std", "0.5", Kind::kReal},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKeys) {
    if (key == k.key) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kConfig, "config key '" + key + "': '" + s + "' is not an integer");
}

double to_real(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kConfig, "config key '" + key + "': '" + s + "' is not a number");
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  fail(ErrorCode::kConfig, "config key '" + key + "': '" + s + "' is not a boolean");
}

// Validates `value` for `spec` and returns its canonical spelling.
std::string canonicalize(const KeySpec& spec, const std::string& value,
                         const std::filesystem::path& base) {
  const std::string key = spec.key;
  const std::string v = trim(value);
  switch (spec.kind) {
    case Kind::kString: return v;
    case Kind::kPath: {
      if (v.empty()) return v;
      const std::filesystem::path p(v);
      return (p.is_absolute() || base.empty() ? p : base / p).lexically_normal().string();
    }
    case Kind::kInt: return std::to_string(to_int(key, v));
    case Kind::kReal: return format_real(to_real(key, v));
    case Kind::kBool: return to_bool(key, v) ? "true" : "false";
    case Kind::kStrings: {
      const auto items = split_list(v);
      for (const auto& i : items) {
        require(!i.empty(), ErrorCode::kConfig, "config key '" + key + "': empty list item");
      }
      std::string out;
      for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
      return out;
    }
    case Kind::kInts: {
      std::string out;
      const auto items = split_list(v);
      for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? ", " : "") + std::to_string(to_int(key, items[i]));
      }
      return out;
    }
    case Kind::kReals: {
      std::string out;
      const auto items = split_list(v);
      for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? ", " : "") + format_real(to_real(key, items[i]));
      }
      return out;
    }
    case Kind::kPools: {
      std::string out;
      const auto pools = parse_pools(v);
      for (std::size_t i = 0; i < pools.size(); ++i) {
        out += fmt::format("{}{}x{}", i ? ", " : "", pools[i].freq, pools[i].time);
      }
      return out;
    }
    case Kind::kKinds: {
      std::string out;
      const auto items = split_list(v);
      require(!items.empty(), ErrorCode::kConfig, "config key '" + key + "' needs a method");
      for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? ", " : "") + std::string(model_kind_name(parse_model_kind(items[i])));
      }
      return out;
    }
  }
  return v;
}

}  // namespace

std::string format_real(double v) { return fmt::format("{}", v); }

std::vector<PoolSize> parse_pools(const std::string& text) {
  std::vector<PoolSize> out;
  for (const auto& item : split_list(text)) {
    const auto x = item.find('x');
    require(x != std::string::npos, ErrorCode::kConfig,
            "pool size '" + item + "' must look like FREQxTIME, e.g. 2x1");
    const auto f = to_int("pool", trim(item.substr(0, x)));
    const auto t = to_int("pool", trim(item.substr(x + 1)));
    require(f > 0 && t > 0, ErrorCode::kConfig, "pool sizes must be positive: " + item);
    out.push_back({static_cast<std::size_t>(f), static_cast<std::size_t>(t)});
  }
  return out;
}

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_[k.key] = canonicalize(k, k.fallback, {});
}

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir_ = base_dir;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::kConfig,
            "config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    require(!cfg.is_explicit(key), ErrorCode::kConfig,
            "config line " + std::to_string(lineno) + ": key '" + key + "' set twice");
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), "config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return parse(binio::read_text(path), path.parent_path());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  require(spec != nullptr, ErrorCode::kConfig, "unknown config key '" + key + "'");
  values_[key] = canonicalize(*spec, value, base_dir_);
  explicit_[key] = true;
}

bool RunConfig::has_key(const std::string& key) const { return find_key(key) != nullptr; }

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::kConfig, "unknown config key '" + key + "'");
  return it->second;
}

bool RunConfig::is_explicit(const std::string& key) const {
  const auto it = explicit_.find(key);
  return it != explicit_.end() && it->second;
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t RunConfig::digest() const { return fnv1a(resolved_text()); }

std::vector<std::string> RunConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& k : kKeys) keys.emplace_back(k.key);
  return keys;
}

std::string RunConfig::get_string(const std::string& key) const { return raw(key); }
std::int64_t RunConfig::get_int(const std::string& key) const { return to_int(key, raw(key)); }
double RunConfig::get_real(const std::string& key) const { return to_real(key, raw(key)); }
bool RunConfig::get_bool(const std::string& key) const { return to_bool(key, raw(key)); }
std::vector<std::string> RunConfig::get_strings(const std::string& key) const {
  return split_list(raw(key));
}
std::vector<std::int64_t> RunConfig::get_ints(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& s : split_list(raw(key))) out.push_back(to_int(key, s));
  return out;
}
std::vector<double> RunConfig::get_reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_list(raw(key))) out.push_back(to_real(key, s));
  return out;
}

namespace {

std::size_t positive(const RunConfig& c, const std::string& key) {
  const auto v = c.get_int(key);
  require(v > 0, ErrorCode::kConfig, "config key '" + key + "' must be positive");
  return static_cast<std::size_t>(v);
}

std::size_t non_negative(const RunConfig& c, const std::string& key) {
  const auto v = c.get_int(key);
  require(v >= 0, ErrorCode::kConfig, "config key '" + key + "' must not be negative");
  return static_cast<std::size_t>(v);
}

std::vector<ConvSpec> conv_specs(const RunConfig& c, const std::string& channels_key,
                                 const std::string& pools_key) {
  const auto ch = c.get_ints(channels_key);
  const auto pools = parse_pools(c.raw(pools_key));
  require(ch.size() == pools.size(), ErrorCode::kConfig,
          "'" + channels_key + "' and '" + pools_key + "' must have the same length");
  std::vector<ConvSpec> out;
  for (std::size_t i = 0; i < ch.size(); ++i) {
    require(ch[i] > 0, ErrorCode::kConfig, "'" + channels_key + "' entries must be positive");
    out.push_back({static_cast<std::size_t>(ch[i]), pools[i]});
  }
  return out;
}

}  // namespace

FeatureParams RunConfig::feature_params() const {
  FeatureParams p;
  p.frame_ms = get_real("feature.frame_ms");
  p.hop_ms = get_real("feature.hop_ms");
  p.n_mels = positive(*this, "feature.n_mels");
  p.log_floor = get_real("feature.log_floor");
  p.pad_to_hop_grid = get_bool("feature.pad_to_hop_grid");
  require(p.frame_ms > 0 && p.hop_ms > 0 && p.log_floor > 0, ErrorCode::kConfig,
          "feature frame, hop and log floor must be positive");
  return p;
}

ModelConfig RunConfig::model_config(std::size_t n_events, std::size_t n_scenes,
                                    std::size_t mel_bins, std::size_t frames) const {
  ModelConfig m;
  auto pick = [&](const std::string& key, std::size_t from_data, std::size_t fallback) {
    const std::size_t v = non_negative(*this, key);
    if (v != 0) {
      require(from_data == 0 || from_data == v, ErrorCode::kConfig,
              "config key '" + key + "' = " + std::to_string(v) + " but the data has " +
                  std::to_string(from_data));
      return v;
    }
    return from_data != 0 ? from_data : fallback;
  };
  m.n_events = pick("model.n_events", n_events, 25);
  m.n_scenes = pick("model.n_scenes", n_scenes, 4);
  m.mel_bins = pick("model.mel_bins", mel_bins, feature_params().n_mels);
  m.frames = pick("model.frames", frames, 500);
  m.shared = conv_specs(*this, "model.shared_channels", "model.shared_pools");
  m.scene = conv_specs(*this, "model.scene_channels", "model.scene_pools");
  m.scene_fc = positive(*this, "model.scene_fc");
  m.gru_units = positive(*this, "model.gru_units");
  m.event_fc = positive(*this, "model.event_fc");
  m.validate();
  return m;
}

TrainConfig RunConfig::train_config(double beta, std::uint64_t seed) const {
  TrainConfig t;
  t.weights = {get_real("train.alpha"), beta};
  require(beta >= 0, ErrorCode::kConfig, "beta must not be negative");
  t.adam.lr = get_real("train.lr");
  t.adam.beta1 = get_real("train.adam_beta1");
  t.adam.beta2 = get_real("train.adam_beta2");
  t.adam.eps = get_real("train.adam_eps");
  require(t.adam.lr > 0 && t.adam.eps > 0, ErrorCode::kConfig,
          "learning rate and epsilon must be positive");
  t.batch_size = positive(*this, "train.batch_size");
  t.epochs = non_negative(*this, "train.epochs");
  t.max_steps = non_negative(*this, "train.max_steps");
  t.seed = seed;
  return t;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s;
  s.scenes = get_strings("synth.scenes");
  const std::size_t n_events = positive(*this, "synth.n_events");
  s.events.clear();
  for (std::size_t e = 0; e < n_events; ++e) s.events.push_back(fmt::format("ev{:02d}", e));
  s.p_primary = get_real("synth.p_primary");
  s.p_other = get_real("synth.p_other");
  s.mean_event_s = get_real("synth.mean_event_s");
  s.clips = non_negative(*this, "synth.clips");
  s.clip_seconds = get_real("synth.seconds");
  s.sample_rate = get_real("synth.sample_rate");
  s.features = feature_params();
  s.render_audio = get_bool("synth.audio");
  s.event_gain = get_real("synth.event_gain");
  s.noise_std = get_real("synth.noise_std");
  s.ratios = split_ratios();
  s.seed = static_cast<std::uint64_t>(get_int("seed"));
  s.validate();
  return s;
}

std::array<double, 3> RunConfig::split_ratios() const {
  const auto r = get_reals("split.ratios");
  require(r.size() == 3, ErrorCode::kConfig, "split.ratios needs three values (train, dev, eval)");
  return {r[0], r[1], r[2]};
}

std::optional<Vocabulary> RunConfig::fixed_vocabulary() const {
  Vocabulary v{get_strings("vocab.scenes"), get_strings("vocab.events")};
  if (v.scenes.empty() && v.events.empty()) return std::nullopt;
  require(!v.scenes.empty() && !v.events.empty(), ErrorCode::kConfig,
          "set both vocab.scenes and vocab.events, or neither");
  return v;
}

}  // namespace jsed
