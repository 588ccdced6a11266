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

// Exercises the shared library only through its C header.

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "jsed/jsed.h"
#include "test_util.hpp"

namespace {

using nlohmann::json;
using jsed::TempDir;

struct Owned {
  char* s = nullptr;
  ~Owned() { jsed_string_free(s); }
  json parse() const { return json::parse(s); }
};

struct Options {
  jsed_options* p = nullptr;
  Options() { EXPECT_EQ(jsed_options_create(&p), JSED_OK); }
  ~Options() { jsed_options_destroy(p); }
};

struct Model {
  jsed_model* p = nullptr;
  ~Model() { jsed_model_destroy(p); }
};

const char* kTinyModel = R"({"n_events": 3, "n_scenes": 2, "mel_bins": 16, "frames": 20,
  "shared": [[4, 4, 1], [4, 2, 1]], "scene": [[4, 1, 5], [4, 1, 4]], "scene_fc": 4,
  "gru_units": 3, "event_fc": 4})";

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(jsed_version(), "0.1.0");
  EXPECT_STREQ(jsed_status_name(JSED_OK), "ok");
  EXPECT_STRNE(jsed_status_name(JSED_ERR_IO), "unknown");
  EXPECT_STREQ(jsed_status_name(static_cast<jsed_status>(99)), "unknown");
}

TEST(CApi, NullArgumentsReportInvalidArgument) {
  EXPECT_EQ(jsed_options_create(nullptr), JSED_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(jsed_last_error()).find("NULL"), std::string::npos);
  EXPECT_EQ(jsed_options_set_out(nullptr, "x"), JSED_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(jsed_model_create(nullptr, nullptr, 0, nullptr), JSED_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(jsed_set_log_level("loud"), JSED_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(jsed_set_log_level("warn"), JSED_OK);
  EXPECT_STREQ(jsed_last_error(), "");
}

TEST(CApi, UnknownCommandAndBadConfig) {
  Options o;
  EXPECT_EQ(jsed_run_command(o.p, "dance", nullptr), JSED_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(jsed_last_error()).find("dance"), std::string::npos);
  EXPECT_EQ(jsed_options_add_override(o.p, "train.bogus=1"), JSED_OK);
  EXPECT_EQ(jsed_run_command(o.p, "count-params", nullptr), JSED_ERR_CONFIG);
  Options missing;
  jsed_options_set_config(missing.p, "/nonexistent/run.cfg");
  const jsed_status s = jsed_run_command(missing.p, "count-params", nullptr);
  EXPECT_TRUE(s == JSED_ERR_IO || s == JSED_ERR_NOT_FOUND) << jsed_status_name(s);
  EXPECT_EQ(jsed_options_set_jobs(o.p, 0), JSED_ERR_INVALID_ARGUMENT);
}

TEST(CApi, CountParamsCommand) {
  Options o;
  Owned out;
  ASSERT_EQ(jsed_run_command(o.p, "count-params", &out.s), JSED_OK) << jsed_last_error();
  const json j = out.parse();
  for (const auto& r : j["counts"]) {
    if (r["model"] == "proposed") {
      EXPECT_EQ(r["shared"], 297216);
      EXPECT_EQ(r["event"], 58585);
      EXPECT_EQ(r["scene"], 902820);
      EXPECT_EQ(r["total"], 1258621);
    }
  }
}

TEST(CApi, DefaultModelCountsAndDims) {
  Model m;
  ASSERT_EQ(jsed_model_create("proposed", nullptr, 1, &m.p), JSED_OK) << jsed_last_error();
  size_t n = 0;
  EXPECT_EQ(jsed_model_count_params(m.p, JSED_GROUP_ALL, &n), JSED_OK);
  EXPECT_EQ(n, 1258621u);
  EXPECT_EQ(jsed_model_count_params(m.p, JSED_GROUP_SHARED | JSED_GROUP_EVENT, &n), JSED_OK);
  EXPECT_EQ(n, 355801u);
  EXPECT_EQ(jsed_model_count_params(m.p, 0, &n), JSED_ERR_INVALID_ARGUMENT);
  size_t d = 0, t = 0, e = 0, s = 0;
  EXPECT_EQ(jsed_model_dims(m.p, &d, &t, &e, &s), JSED_OK);
  EXPECT_EQ(d, 64u);
  EXPECT_EQ(t, 500u);
  EXPECT_EQ(e, 25u);
  EXPECT_EQ(s, 4u);

  Model crnn;
  ASSERT_EQ(jsed_model_create("crnn_event", nullptr, 1, &crnn.p), JSED_OK);
  EXPECT_EQ(jsed_model_dims(crnn.p, nullptr, nullptr, &e, &s), JSED_OK);
  EXPECT_EQ(s, 0u);
  EXPECT_EQ(jsed_model_count_params(crnn.p, JSED_GROUP_ALL, &n), JSED_OK);
  EXPECT_EQ(n, 355801u);

  Model bad;
  EXPECT_EQ(jsed_model_create("transformer", nullptr, 1, &bad.p), JSED_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(bad.p, nullptr);
  EXPECT_EQ(jsed_model_create("proposed", "{not json", 1, &bad.p), JSED_ERR_FORMAT);
}

TEST(CApi, PredictRangesAndDeterminism) {
  Model m;
  ASSERT_EQ(jsed_model_create("proposed", kTinyModel, 5, &m.p), JSED_OK) << jsed_last_error();
  std::vector<float> x(16 * 20);
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.37f * static_cast<float>(i));
  std::vector<float> ev(3 * 20), ev2(3 * 20), sc(2), sc2(2);
  ASSERT_EQ(jsed_model_predict(m.p, x.data(), 16, 20, ev.data(), sc.data()), JSED_OK)
      << jsed_last_error();
  ASSERT_EQ(jsed_model_predict(m.p, x.data(), 16, 20, ev2.data(), sc2.data()), JSED_OK);
  EXPECT_EQ(ev, ev2);
  EXPECT_EQ(sc, sc2);
  for (float p : ev) {
    EXPECT_GT(p, 0.0f);
    EXPECT_LT(p, 1.0f);
  }
  EXPECT_NEAR(sc[0] + sc[1], 1.0f, 1e-6f);
  EXPECT_EQ(jsed_model_predict(m.p, x.data(), 16, 19, ev.data(), nullptr), JSED_ERR_SHAPE);

  Owned info;
  ASSERT_EQ(jsed_model_describe(m.p, &info.s), JSED_OK);
  const json j = info.parse();
  EXPECT_EQ(j["kind"], "proposed");
  EXPECT_EQ(j["model"]["gru_units"], 3);
  EXPECT_EQ(j["params"]["total"].get<size_t>(),
            j["params"]["shared"].get<size_t>() + j["params"]["event"].get<size_t>() +
                j["params"]["scene"].get<size_t>());
}

TEST(CApi, EventScores) {
  // Two events, four frames.
  const uint8_t ref[] = {1, 1, 0, 0, 0, 0, 1, 0};
  const uint8_t pred[] = {1, 0, 0, 1, 0, 0, 1, 0};
  jsed_event_scores s{};
  ASSERT_EQ(jsed_event_scores_compute(pred, ref, 2, 4, 1, &s), JSED_OK);
  EXPECT_EQ(s.tp, 2u);
  EXPECT_EQ(s.fp, 1u);
  EXPECT_EQ(s.fn, 1u);
  EXPECT_DOUBLE_EQ(s.f, 2.0 / 3);
  EXPECT_EQ(s.reference, 3u);
  EXPECT_EQ(s.deletions, 1u);
  EXPECT_EQ(s.insertions, 1u);
  EXPECT_DOUBLE_EQ(s.error_rate, 2.0 / 3);

  const uint8_t none[8] = {};
  ASSERT_EQ(jsed_event_scores_compute(pred, none, 2, 4, 1, &s), JSED_OK);
  EXPECT_TRUE(std::isnan(s.error_rate));
  EXPECT_EQ(jsed_event_scores_compute(pred, ref, 2, 4, 0, &s), JSED_ERR_INVALID_ARGUMENT);

  ASSERT_EQ(jsed_event_scores_compute(pred, ref, 2, 4, 2, &s), JSED_OK);
  EXPECT_EQ(s.tp, 2u);
  EXPECT_EQ(s.fp, 1u);
  EXPECT_EQ(s.fn, 0u);
}

TEST(CApi, TuneThresholds) {
  const float scores[] = {0.2f, 0.6f, 0.9f};
  const uint8_t targets[] = {0, 1, 1};
  double theta = 0;
  ASSERT_EQ(jsed_tune_thresholds(scores, targets, 1, 1, 3, &theta), JSED_OK);
  EXPECT_DOUBLE_EQ(theta, 0.5);
  EXPECT_EQ(jsed_tune_thresholds(scores, targets, 0, 1, 3, &theta), JSED_ERR_INVALID_ARGUMENT);
}

TEST(CApi, PipelineThroughCommands) {
  TempDir dir;
  jsed::write_string(dir.path() / "tiny.cfg",
                     "synth.clips = 12\nsynth.seconds = 2\nsynth.n_events = 4\n"
                     "feature.n_mels = 32\nmodel.shared_channels = 4, 4, 4\n"
                     "model.scene_channels = 4, 4\nmodel.scene_pools = 1x10, 1x10\n"
                     "model.gru_units = 4\nmodel.event_fc = 4\nmodel.scene_fc = 4\n"
                     "train.epochs = 1\ntrain.methods = proposed, cnn_scene\n");
  Options o;
  ASSERT_EQ(jsed_options_set_config(o.p, (dir.path() / "tiny.cfg").c_str()), JSED_OK);
  ASSERT_EQ(jsed_options_set_out(o.p, (dir.path() / "out").c_str()), JSED_OK);
  ASSERT_EQ(jsed_options_set_seed(o.p, 4), JSED_OK);
  ASSERT_EQ(jsed_options_set_jobs(o.p, 2), JSED_OK);
  for (const char* cmd : {"synth-data", "extract-features", "train", "tune-thresholds",
                          "evaluate", "report"}) {
    Owned out;
    ASSERT_EQ(jsed_run_command(o.p, cmd, &out.s), JSED_OK) << cmd << ": " << jsed_last_error();
    EXPECT_EQ(out.parse()["command"], cmd);
  }
  const auto run = dir.path() / "out/runs/proposed_b0.01_s4";
  Model m;
  ASSERT_EQ(jsed_model_load((run / "best.ckpt").c_str(), &m.p), JSED_OK) << jsed_last_error();
  size_t d = 0, t = 0, e = 0, s = 0;
  jsed_model_dims(m.p, &d, &t, &e, &s);
  EXPECT_EQ(d, 32u);
  EXPECT_EQ(t, 100u);
  EXPECT_EQ(e, 4u);
  EXPECT_EQ(s, 4u);
  Owned info;
  ASSERT_EQ(jsed_model_describe(m.p, &info.s), JSED_OK);
  EXPECT_EQ(info.parse()["checkpoint"]["seed"], 4);
  std::vector<float> x(d * t, 0.0f), ev(e * t), sc(s);
  EXPECT_EQ(jsed_model_predict(m.p, x.data(), d, t, ev.data(), sc.data()), JSED_OK);
  EXPECT_NEAR(std::accumulate(sc.begin(), sc.end(), 0.0f), 1.0f, 1e-5f);

  Model scene;
  ASSERT_EQ(jsed_model_load((dir.path() / "out/runs/cnn_scene_s4/best.ckpt").c_str(), &scene.p),
            JSED_OK);
  jsed_model_dims(scene.p, nullptr, nullptr, &e, &s);
  EXPECT_EQ(e, 0u);
  const json th = json::parse(jsed::read_string(dir.path() / "out/runs/cnn_scene_s4/thresholds.json"));
  EXPECT_TRUE(th["theta"].empty());

  Model missing;
  EXPECT_NE(jsed_model_load((dir.path() / "nope.ckpt").c_str(), &missing.p), JSED_OK);
  EXPECT_NE(std::string(jsed_last_error()), "");
}

}  // namespace
