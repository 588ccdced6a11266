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

#ifndef JSED_PIPELINE_HPP_
#define JSED_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsed/run_config.hpp"

namespace jsed {

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;  // replaces `seed` and `train.seeds`
  std::size_t jobs = 1;
  std::vector<std::string> overrides;  // "key=value"
  std::vector<std::filesystem::path> run_dirs;  // report: explicit runs
};

RunConfig resolve_config(const CommandOptions& opts);

// Each command returns a JSON summary. A "text" member, when present, holds
// the human-readable table for the terminal.
nlohmann::json cmd_synth_data(const CommandOptions& opts);
nlohmann::json cmd_extract_features(const CommandOptions& opts);
nlohmann::json cmd_train(const CommandOptions& opts);
nlohmann::json cmd_tune_thresholds(const CommandOptions& opts);
nlohmann::json cmd_evaluate(const CommandOptions& opts);
nlohmann::json cmd_count_params(const CommandOptions& opts);
nlohmann::json cmd_report(const CommandOptions& opts);

// Model configuration as stored in checkpoint metadata.
nlohmann::json model_config_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct LoadedModel {
  Network<float> net;
  Standardizer norm;
  std::vector<std::string> events;
  std::vector<std::string> scenes;
  nlohmann::json meta;
};

// Reads a checkpoint written by `train` (architecture from its metadata).
LoadedModel load_model(const std::filesystem::path& ckpt_path);

// "<method>_b<beta>_s<seed>" for the multitask model, "<method>_s<seed>"
// for single-task models (beta does not apply).
std::string run_name(ModelKind kind, double beta, std::uint64_t seed);

}  // namespace jsed

#endif  // JSED_PIPELINE_HPP_
