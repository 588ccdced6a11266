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

#ifndef JSED_METRICS_HPP_
#define JSED_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jsed/roll.hpp"
#include "jsed/tensor.hpp"

namespace jsed {

struct Thresholds {
  std::vector<double> theta;  // one per event, each in (0, 1)
};

// Candidate thresholds 0.01, 0.02, ..., 0.99.
std::vector<double> threshold_grid();

// Per event, picks the grid value maximizing frame-level F on the dev set.
// Ties go to the value nearest 0.5, then to the smaller one. Events with no
// active dev frame get 0.5. Scores are [M, T] per clip.
Thresholds tune_thresholds(std::span<const Tensorf> dev_scores,
                           std::span<const EventRoll> dev_targets);

// pred[m, t] = scores[m, t] > theta[m].
EventRoll binarize(const Tensorf& scores, const Thresholds& thresholds);

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

struct Prf {
  double precision = 0;
  double recall = 0;
  double f = 0;
};

// Each ratio is 0 when its denominator is 0.
Prf prf(const Counts& c);

// Per-frame tallies used by the error rate.
struct FrameTally {
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t n = 0;  // active reference events in the frame
};

struct ErrorRate {
  std::optional<double> er;  // empty when there is no reference activity
  std::uint64_t substitutions = 0;
  std::uint64_t deletions = 0;
  std::uint64_t insertions = 0;
  std::uint64_t reference = 0;
};

ErrorRate error_rate(std::span<const FrameTally> frames);

// Collapses each run of `segment` frames into one segment that is active when
// any of its frames is. segment == 1 returns the roll unchanged.
EventRoll to_segments(const EventRoll& roll, std::size_t segment);

struct FrameCounts {
  std::vector<Counts> per_event;
  std::vector<FrameTally> per_frame;  // across all events
  Counts total() const;
};

FrameCounts count_frames(const EventRoll& pred, const EventRoll& target);

// FP frames / total frames, per event, over a set of aligned clips.
std::vector<double> false_positive_rate(std::span<const EventRoll> preds,
                                        std::span<const EventRoll> targets);

struct SceneEval {
  Counts counts;  // clip-level
  Prf prf;
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
  std::vector<std::optional<double>> recall;          // empty if no clips of that scene
};

SceneEval scene_eval(std::span<const std::size_t> preds,
                     std::span<const std::size_t> targets, std::size_t n_scenes);

struct ClipOutcome {
  std::string clip_id;
  std::size_t true_scene = 0;
  std::optional<EventRoll> pred_roll;
  std::optional<EventRoll> target_roll;
  std::optional<std::size_t> pred_scene;
};

struct EvalReport {
  std::vector<std::string> events;
  std::vector<std::string> scenes;
  std::size_t segment = 1;
  std::size_t clips = 0;

  bool has_events = false;
  Counts event_counts;
  Prf event_prf;
  ErrorRate event_er;
  std::vector<Counts> per_event_counts;
  std::vector<Prf> per_event_prf;
  std::vector<ErrorRate> per_event_er;
  // [scene][event]; empty optional when the scene has no evaluation frames.
  std::vector<std::vector<std::optional<double>>> fpr;

  bool has_scenes = false;
  SceneEval scene;

  std::string to_json() const;  // pretty-printed JSON document
  std::string to_text() const;   // aligned tables
};

EvalReport build_report(std::span<const ClipOutcome> clips,
                        const std::vector<std::string>& events,
                        const std::vector<std::string>& scenes, std::size_t segment = 1);

// Roll file: one line per frame, "clip_id<TAB>frame<TAB>b_1 b_2 ... b_M".
using NamedRoll = std::pair<std::string, EventRoll>;
void write_roll_file(const std::filesystem::path& path, std::span<const NamedRoll> rolls);
std::vector<NamedRoll> read_roll_file(const std::filesystem::path& path);

}  // namespace jsed

#endif  // JSED_METRICS_HPP_
