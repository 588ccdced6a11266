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

#include "jsed/jsed.h"

#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <new>
#include <string>

#include "jsed/metrics.hpp"
#include "jsed/pipeline.hpp"
#include "jsed/training.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

struct jsed_options {
  jsed::CommandOptions opts;
};

struct jsed_model {
  jsed::LoadedModel m;
  bool has_norm = false;
};

namespace {

thread_local std::string g_last_error;

// Library diagnostics never touch stdout, which carries command results.
const bool g_stderr_logger = [] {
  auto logger = spdlog::stderr_color_mt("jsed");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  return true;
}();

jsed_status to_status(jsed::ErrorCode c) { return static_cast<jsed_status>(static_cast<int>(c)); }

template <typename F>
jsed_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return JSED_OK;
  } catch (const jsed::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return JSED_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return JSED_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return JSED_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  jsed::require(p != nullptr, jsed::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

jsed::EventRoll roll_from(const std::uint8_t* bits, std::size_t m_count, std::size_t t_count) {
  jsed::EventRoll r(m_count, t_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    for (std::size_t t = 0; t < t_count; ++t) r.set(m, t, bits[m * t_count + t] != 0);
  }
  return r;
}

}  // namespace

extern "C" {

const char* jsed_version(void) { return "0.1.0"; }

const char* jsed_status_name(jsed_status status) {
  if (status == JSED_OK) return "ok";
  if (status < JSED_ERR_INVALID_ARGUMENT || status > JSED_ERR_INTERNAL) return "unknown";
  return jsed::error_code_name(static_cast<jsed::ErrorCode>(status));
}

const char* jsed_last_error(void) { return g_last_error.c_str(); }

void jsed_string_free(char* s) { std::free(s); }

jsed_status jsed_set_log_level(const char* level) {
  return guarded([&] {
    need(level, "level");
    const auto lv = spdlog::level::from_str(level);
    jsed::require(lv != spdlog::level::off || std::string(level) == "off",
                  jsed::ErrorCode::kInvalidArgument, std::string("unknown log level '") + level + "'");
    spdlog::set_level(lv);
  });
}

jsed_status jsed_options_create(jsed_options** out) {
  return guarded([&] {
    need(out, "out");
    *out = new jsed_options();
  });
}

void jsed_options_destroy(jsed_options* opts) { delete opts; }

jsed_status jsed_options_set_config(jsed_options* opts, const char* path) {
  return guarded([&] {
    need(opts, "opts");
    if (path) {
      opts->opts.config = path;
    } else {
      opts->opts.config.reset();
    }
  });
}

jsed_status jsed_options_set_out(jsed_options* opts, const char* dir) {
  return guarded([&] {
    need(opts, "opts");
    need(dir, "dir");
    opts->opts.out = dir;
  });
}

jsed_status jsed_options_set_seed(jsed_options* opts, uint64_t seed) {
  return guarded([&] {
    need(opts, "opts");
    opts->opts.seed = seed;
  });
}

jsed_status jsed_options_set_jobs(jsed_options* opts, size_t jobs) {
  return guarded([&] {
    need(opts, "opts");
    jsed::require(jobs > 0, jsed::ErrorCode::kInvalidArgument, "jobs must be positive");
    opts->opts.jobs = jobs;
  });
}

jsed_status jsed_options_add_override(jsed_options* opts, const char* assignment) {
  return guarded([&] {
    need(opts, "opts");
    need(assignment, "assignment");
    opts->opts.overrides.emplace_back(assignment);
  });
}

jsed_status jsed_options_add_run_dir(jsed_options* opts, const char* dir) {
  return guarded([&] {
    need(opts, "opts");
    need(dir, "dir");
    opts->opts.run_dirs.emplace_back(dir);
  });
}

jsed_status jsed_run_command(const jsed_options* opts, const char* command, char** summary_json) {
  return guarded([&] {
    need(opts, "opts");
    need(command, "command");
    const std::string c = command;
    nlohmann::json j;
    if (c == "synth-data") {
      j = jsed::cmd_synth_data(opts->opts);
    } else if (c == "extract-features") {
      j = jsed::cmd_extract_features(opts->opts);
    } else if (c == "train") {
      j = jsed::cmd_train(opts->opts);
    } else if (c == "tune-thresholds") {
      j = jsed::cmd_tune_thresholds(opts->opts);
    } else if (c == "evaluate") {
      j = jsed::cmd_evaluate(opts->opts);
    } else if (c == "count-params") {
      j = jsed::cmd_count_params(opts->opts);
    } else if (c == "report") {
      j = jsed::cmd_report(opts->opts);
    } else {
      jsed::fail(jsed::ErrorCode::kInvalidArgument, "unknown command '" + c + "'");
    }
    if (summary_json) *summary_json = dup_string(j.dump(2));
  });
}

jsed_status jsed_model_create(const char* kind, const char* config_json, uint64_t seed,
                              jsed_model** out) {
  return guarded([&] {
    need(kind, "kind");
    need(out, "out");
    jsed::ModelKind k{};
    try {
      k = jsed::parse_model_kind(kind);
    } catch (const jsed::Error& e) {
      jsed::fail(jsed::ErrorCode::kInvalidArgument, e.what());
    }
    jsed::ModelConfig cfg;
    if (config_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::exception& e) {
        jsed::fail(jsed::ErrorCode::kFormat, std::string("config_json: ") + e.what());
      }
      cfg = jsed::model_config_from_json(j);
    } else {
      cfg = jsed::RunConfig().model_config();
    }
    auto* m = new jsed_model();
    try {
      m->m.net = jsed::Network<float>::build(k, cfg, seed);
    } catch (...) {
      delete m;
      throw;
    }
    *out = m;
  });
}

jsed_status jsed_model_load(const char* checkpoint_path, jsed_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    auto* m = new jsed_model();
    try {
      m->m = jsed::load_model(checkpoint_path);
      m->has_norm = true;
    } catch (...) {
      delete m;
      throw;
    }
    *out = m;
  });
}

void jsed_model_destroy(jsed_model* model) { delete model; }

jsed_status jsed_model_describe(const jsed_model* model, char** info_json) {
  return guarded([&] {
    need(model, "model");
    need(info_json, "info_json");
    const auto& net = model->m.net;
    using G = jsed::Group;
    nlohmann::json j = {
        {"kind", jsed::model_kind_name(net.kind())},
        {"model", jsed::model_config_json(net.config())},
        {"events", model->m.events},
        {"scenes", model->m.scenes},
        {"params",
         {{"shared", net.count_params(static_cast<unsigned>(G::kShared))},
          {"event", net.count_params(static_cast<unsigned>(G::kEvent))},
          {"scene", net.count_params(static_cast<unsigned>(G::kScene))},
          {"total", net.count_params()}}}};
    if (!model->m.meta.is_null()) j["checkpoint"] = model->m.meta;
    *info_json = dup_string(j.dump(2));
  });
}

jsed_status jsed_model_count_params(const jsed_model* model, unsigned group_mask, size_t* count) {
  return guarded([&] {
    need(model, "model");
    need(count, "count");
    jsed::require(group_mask != 0 && group_mask <= JSED_GROUP_ALL,
                  jsed::ErrorCode::kInvalidArgument, "bad group mask");
    *count = model->m.net.count_params(group_mask);
  });
}

jsed_status jsed_model_dims(const jsed_model* model, size_t* mel_bins, size_t* frames,
                            size_t* n_events, size_t* n_scenes) {
  return guarded([&] {
    need(model, "model");
    const auto& net = model->m.net;
    const auto& c = net.config();
    if (mel_bins) *mel_bins = c.mel_bins;
    if (frames) *frames = c.frames;
    if (n_events) *n_events = net.has_event_head() ? c.n_events : 0;
    if (n_scenes) *n_scenes = net.has_scene_head() ? c.n_scenes : 0;
  });
}

jsed_status jsed_model_predict(const jsed_model* model, const float* features, size_t mel_bins,
                               size_t frames, float* event_probs, float* scene_probs) {
  return guarded([&] {
    need(model, "model");
    need(features, "features");
    const auto& net = model->m.net;
    const auto& c = net.config();
    jsed::require(mel_bins == c.mel_bins && frames == c.frames, jsed::ErrorCode::kShape,
                  "features must be [" + std::to_string(c.mel_bins) + ", " +
                      std::to_string(c.frames) + "]");
    jsed::Tensorf x({mel_bins, frames},
                    std::vector<float>(features, features + mel_bins * frames));
    if (model->has_norm) x = model->m.norm.apply(x);
    const jsed::Tensorf* ptr = &x;
    const auto scores = jsed::predict(net, std::span<const jsed::Tensorf* const>(&ptr, 1));
    if (event_probs && net.has_event_head()) {
      const auto v = scores[0].event_probs.values();
      std::copy(v.begin(), v.end(), event_probs);
    }
    if (scene_probs && net.has_scene_head()) {
      std::copy(scores[0].scene_probs.begin(), scores[0].scene_probs.end(), scene_probs);
    }
  });
}

jsed_status jsed_event_scores_compute(const uint8_t* pred, const uint8_t* ref, size_t n_events,
                                      size_t frames, size_t segment, jsed_event_scores* out) {
  return guarded([&] {
    need(pred, "pred");
    need(ref, "ref");
    need(out, "out");
    jsed::require(segment > 0, jsed::ErrorCode::kInvalidArgument, "segment must be positive");
    const auto p = jsed::to_segments(roll_from(pred, n_events, frames), segment);
    const auto r = jsed::to_segments(roll_from(ref, n_events, frames), segment);
    const auto fc = jsed::count_frames(p, r);
    const auto total = fc.total();
    const auto s = jsed::prf(total);
    const auto er = jsed::error_rate(fc.per_frame);
    *out = jsed_event_scores{total.tp,
                             total.fp,
                             total.fn,
                             s.precision,
                             s.recall,
                             s.f,
                             er.er ? *er.er : std::numeric_limits<double>::quiet_NaN(),
                             er.substitutions,
                             er.deletions,
                             er.insertions,
                             er.reference};
  });
}

jsed_status jsed_tune_thresholds(const float* scores, const uint8_t* targets, size_t n_clips,
                                 size_t n_events, size_t frames, double* thresholds) {
  return guarded([&] {
    need(scores, "scores");
    need(targets, "targets");
    need(thresholds, "thresholds");
    const std::size_t block = n_events * frames;
    std::vector<jsed::Tensorf> s;
    std::vector<jsed::EventRoll> t;
    for (std::size_t i = 0; i < n_clips; ++i) {
      s.emplace_back(jsed::Shape{n_events, frames},
                     std::vector<float>(scores + i * block, scores + (i + 1) * block));
      t.push_back(roll_from(targets + i * block, n_events, frames));
    }
    const auto th = jsed::tune_thresholds(s, t);
    std::copy(th.theta.begin(), th.theta.end(), thresholds);
  });
}

}  // extern "C"
