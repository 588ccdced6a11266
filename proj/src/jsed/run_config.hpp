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

#ifndef JSED_RUN_CONFIG_HPP_
#define JSED_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jsed/audio.hpp"
#include "jsed/dataset.hpp"
#include "jsed/model.hpp"
#include "jsed/training.hpp"

namespace jsed {

// Plain-text "key = value" document; '#' starts a comment, lists are
// comma-separated. Every key has a default; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();  // all defaults

  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  // Overrides one key; the value is validated against the key's type.
  void set(const std::string& key, const std::string& value);
  bool has_key(const std::string& key) const;
  const std::string& raw(const std::string& key) const;
  // Keys explicitly set by the document or set().
  bool is_explicit(const std::string& key) const;

  // Every key with its effective value, sorted; suitable for parse().
  std::string resolved_text() const;
  std::uint64_t digest() const;

  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
  std::vector<std::int64_t> get_ints(const std::string& key) const;
  std::vector<double> get_reals(const std::string& key) const;

  FeatureParams feature_params() const;
  // n_events / n_scenes / mel_bins / frames set to 0 in the document are
  // filled from the arguments.
  ModelConfig model_config(std::size_t n_events = 0, std::size_t n_scenes = 0,
                           std::size_t mel_bins = 0, std::size_t frames = 0) const;
  TrainConfig train_config(double beta, std::uint64_t seed) const;
  SynthConfig synth_config() const;
  std::array<double, 3> split_ratios() const;
  // Empty when neither vocab.scenes nor vocab.events is set.
  std::optional<Vocabulary> fixed_vocabulary() const;

  static std::vector<std::string> known_keys();

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
  std::filesystem::path base_dir_;
};

std::vector<PoolSize> parse_pools(const std::string& text);
std::string format_real(double v);

}  // namespace jsed

#endif  // JSED_RUN_CONFIG_HPP_
