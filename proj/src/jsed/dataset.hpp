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

#ifndef JSED_DATASET_HPP_
#define JSED_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jsed/audio.hpp"
#include "jsed/roll.hpp"

namespace jsed {

struct EventSpan {
  double onset = 0;   // seconds
  double offset = 0;  // seconds, > onset
  std::string label;
  bool operator==(const EventSpan&) const = default;
};

enum class Split { kUnassigned, kTrain, kDev, kEval };
const char* split_name(Split s);
Split parse_split(const std::string& s);

struct ClipRecord {
  std::string id;
  std::filesystem::path path;  // audio (.wav) or feature map (.jsfm)
  std::string scene;
  std::filesystem::path annotation;  // may be empty
  std::vector<EventSpan> spans;
  Split split = Split::kUnassigned;
};

struct Vocabulary {
  std::vector<std::string> scenes;
  std::vector<std::string> events;
  std::optional<std::size_t> scene_index(const std::string& s) const;
  std::optional<std::size_t> event_index(const std::string& e) const;
};

struct Manifest {
  std::vector<ClipRecord> clips;  // sorted by clip id
  Vocabulary vocab;
};

// Annotation file: one event per line, "onset<TAB>offset<TAB>label".
std::vector<EventSpan> read_annotation(const std::filesystem::path& path);
void write_annotation(const std::filesystem::path& path, std::span<const EventSpan> spans);

// Reads either a manifest ("id<TAB>path<TAB>scene<TAB>annotation[<TAB>split]")
// or TUT-style metadata ("path<TAB>scene[<TAB>onset<TAB>offset<TAB>label]").
// For TUT metadata the clip id is the file stem, inline event rows are
// collected per file, and a sibling "<stem>.ann" file is read when present.
// Relative paths resolve against the manifest's directory. When `fixed` is
// given, labels outside it are rejected and its ordering is kept; otherwise
// vocabularies are the sorted sets of labels seen.
Manifest load_manifest(const std::filesystem::path& path, const Vocabulary* fixed = nullptr);
void write_manifest(const std::filesystem::path& path, std::span<const ClipRecord> clips);

// roll[m][t] = 1 iff [t*hop, (t+1)*hop) overlaps [onset, offset) by a
// positive length. Spans past the clip end are clamped (and counted in
// `clamped` when given).
EventRoll make_target_roll(std::span<const EventSpan> spans,
                           const std::vector<std::string>& events, std::size_t frames,
                           double hop_s, std::size_t* clamped = nullptr);

// Maximal runs of active frames as spans on the frame grid.
std::vector<EventSpan> spans_from_roll(const EventRoll& roll,
                                       const std::vector<std::string>& events, double hop_s);

struct SynthConfig {
  std::vector<std::string> scenes = {"city_center", "home", "office", "residential_area"};
  std::vector<std::string> events;  // default: ev00 .. ev09
  // Per-frame activity probability P[scene][event]. Empty: each event gets
  // p_primary in scene (e mod S) and p_other elsewhere.
  std::vector<std::vector<double>> prior;
  double p_primary = 0.35;
  double p_other = 0.02;
  double mean_event_s = 1.0;  // mean active-run length
  std::size_t clips = 200;
  double clip_seconds = 10.0;
  double sample_rate = 44100.0;
  FeatureParams features;
  bool render_audio = false;  // false: emit log-mel maps directly
  double event_gain = 3.0;    // log-mel bump height (feature mode)
  double noise_std = 0.5;     // log-mel ambience noise (feature mode)
  std::array<double, 3> ratios = {0.6, 0.2, 0.2};
  std::uint64_t seed = 1;

  std::vector<std::string> event_names() const;
  std::vector<std::vector<double>> prior_matrix() const;
  void validate() const;
};

// Mel bands [lo, lo + width) reserved for event e; disjoint across events.
struct Band {
  std::size_t lo = 0;
  std::size_t width = 0;
};
Band event_band(std::size_t event, std::size_t n_events, std::size_t n_mels);

struct SynthClip {
  ClipRecord record;
  EventRoll roll;              // exact activity behind the annotation
  std::optional<Tensorf> features;  // feature mode
  std::optional<AudioClip> audio;   // audio mode
};

// Renders clip `index` of the corpus. Depends only on (cfg, index).
SynthClip synth_clip(const SynthConfig& cfg, std::size_t index);

// Writes manifest.tsv, annotations/ and features/ or audio/ under `dir`,
// with stratified split tags. Returns the records.
std::vector<ClipRecord> synth_corpus(const SynthConfig& cfg, const std::filesystem::path& dir);

// Deterministic split, stratified by scene. Global split sizes follow the
// largest-remainder rule; each stratum stays within one clip of its share.
void split_corpus(std::vector<ClipRecord>& records, std::array<double, 3> ratios,
                  std::uint64_t seed);

}  // namespace jsed

#endif  // JSED_DATASET_HPP_
