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

#include "jsed/dataset.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "jsed/binio.hpp"
#include "jsed/rng.hpp"

namespace jsed {

namespace fs = std::filesystem;

const char* split_name(Split s) {
  switch (s) {
    case Split::kUnassigned: return "";
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kEval: return "eval";
  }
  return "";
}

Split parse_split(const std::string& s) {
  if (s.empty()) return Split::kUnassigned;
  if (s == "train") return Split::kTrain;
  if (s == "dev" || s == "devel" || s == "validation") return Split::kDev;
  if (s == "eval" || s == "test" || s == "evaluate") return Split::kEval;
  fail(ErrorCode::kFormat, "unknown split tag '" + s + "' (expected train, dev or eval)");
}

namespace {

std::optional<std::size_t> index_in(const std::vector<std::string>& v, const std::string& s) {
  const auto it = std::find(v.begin(), v.end(), s);
  if (it == v.end()) return std::nullopt;
  return static_cast<std::size_t>(it - v.begin());
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

EventSpan checked_span(double on, double off, std::string label, const std::string& where) {
  require(on >= 0 && on < off, ErrorCode::kFormat,
          where + ": event needs 0 <= onset < offset (got " + std::to_string(on) + ", " +
              std::to_string(off) + ")");
  require(!label.empty(), ErrorCode::kFormat, where + ": empty event label");
  return {on, off, std::move(label)};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::optional<std::size_t> Vocabulary::scene_index(const std::string& s) const {
  return index_in(scenes, s);
}

std::optional<std::size_t> Vocabulary::event_index(const std::string& e) const {
  return index_in(events, e);
}

std::vector<EventSpan> read_annotation(const fs::path& path) {
  std::istringstream is(binio::read_text(path));
  std::vector<EventSpan> spans;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    std::string a, b, label;
    if (line.find('\t') != std::string::npos) {
      const auto f = split_tabs(line);
      require(f.size() >= 3, ErrorCode::kFormat, where + ": expected onset, offset, label");
      a = f[0];
      b = f[1];
      label = f[2];
    } else {
      std::istringstream ls(line);
      ls >> a >> b;
      std::getline(ls >> std::ws, label);
    }
    const auto on = parse_number(a), off = parse_number(b);
    require(on && off, ErrorCode::kFormat, where + ": onset and offset must be numbers");
    spans.push_back(checked_span(*on, *off, label, where));
  }
  return spans;
}

void write_annotation(const fs::path& path, std::span<const EventSpan> spans) {
  std::string out;
  for (const auto& s : spans) out += fmt::format("{:.6f}\t{:.6f}\t{}\n", s.onset, s.offset, s.label);
  binio::write_text(path, out);
}

Manifest load_manifest(const fs::path& path, const Vocabulary* fixed) {
  std::istringstream is(binio::read_text(path));
  const fs::path base = path.parent_path();
  std::map<std::string, ClipRecord> by_id;
  std::string line;
  std::size_t lineno = 0;
  enum class Format { kUnknown, kManifest, kTut } format = Format::kUnknown;
  std::set<std::string> tut_seen_ann;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = split_tabs(line);
    if (format == Format::kUnknown) {
      if (f.size() == 2 || (f.size() == 5 && parse_number(f[2]) && parse_number(f[3]))) {
        format = Format::kTut;
      } else if (f.size() == 4 || f.size() == 5) {
        if (f[0] == "id" || f[0] == "clip_id") continue;  // header row
        format = Format::kManifest;
      } else {
        fail(ErrorCode::kFormat, where + ": unrecognized manifest row with " +
                                     std::to_string(f.size()) + " fields");
      }
    }
    if (format == Format::kManifest) {
      require(f.size() == 4 || f.size() == 5, ErrorCode::kFormat,
              where + ": expected id, path, scene, annotation[, split]");
      require(!f[0].empty(), ErrorCode::kFormat, where + ": empty clip id");
      ClipRecord rec;
      rec.id = f[0];
      rec.path = resolve(base, f[1]);
      rec.scene = f[2];
      if (!f[3].empty()) {
        rec.annotation = resolve(base, f[3]);
        rec.spans = read_annotation(rec.annotation);
      }
      if (f.size() == 5) rec.split = parse_split(f[4]);
      require(by_id.emplace(rec.id, rec).second, ErrorCode::kFormat,
              where + ": duplicate clip id " + rec.id);
    } else {
      require(f.size() == 2 || f.size() == 5, ErrorCode::kFormat,
              where + ": expected path, scene[, onset, offset, label]");
      const fs::path audio = resolve(base, f[0]);
      const std::string id = fs::path(f[0]).stem().string();
      auto [it, inserted] = by_id.try_emplace(id);
      ClipRecord& rec = it->second;
      if (inserted) {
        rec.id = id;
        rec.path = audio;
        rec.scene = f[1];
        fs::path ann = audio;
        ann.replace_extension(".ann");
        if (fs::exists(ann)) {
          rec.annotation = ann;
          rec.spans = read_annotation(ann);
        }
      } else {
        require(rec.path == audio && rec.scene == f[1], ErrorCode::kFormat,
                where + ": clip " + id + " listed with a different path or scene");
      }
      if (f.size() == 5) {
        const double on = *parse_number(f[2]), off = *parse_number(f[3]);
        EventSpan s = checked_span(on, off, f[4], where);
        if (std::find(rec.spans.begin(), rec.spans.end(), s) == rec.spans.end()) {
          rec.spans.push_back(std::move(s));
        }
      }
    }
  }

  Manifest m;
  std::set<std::string> scenes, events;
  for (auto& [id, rec] : by_id) {
    std::sort(rec.spans.begin(), rec.spans.end(), [](const EventSpan& a, const EventSpan& b) {
      return std::tie(a.onset, a.offset, a.label) < std::tie(b.onset, b.offset, b.label);
    });
    scenes.insert(rec.scene);
    for (const auto& s : rec.spans) events.insert(s.label);
    m.clips.push_back(std::move(rec));
  }
  if (fixed) {
    m.vocab = *fixed;
    for (const auto& s : scenes) {
      require(fixed->scene_index(s).has_value(), ErrorCode::kFormat,
              path.string() + ": scene '" + s + "' is not in the configured vocabulary");
    }
    for (const auto& e : events) {
      require(fixed->event_index(e).has_value(), ErrorCode::kFormat,
              path.string() + ": event '" + e + "' is not in the configured vocabulary");
    }
  } else {
    m.vocab.scenes.assign(scenes.begin(), scenes.end());
    m.vocab.events.assign(events.begin(), events.end());
  }
  return m;
}

void write_manifest(const fs::path& path, std::span<const ClipRecord> clips) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) -> std::string {
    if (p.empty()) return "";
    const auto r = p.lexically_relative(base);
    return (r.empty() || *r.begin() == "..") ? p.string() : r.string();
  };
  std::string out = "# id\tpath\tscene\tannotation\tsplit\n";
  for (const auto& c : clips) {
    out += c.id + '\t' + rel(c.path) + '\t' + c.scene + '\t' + rel(c.annotation) + '\t' +
           split_name(c.split) + '\n';
  }
  binio::write_text(path, out);
}

EventRoll make_target_roll(std::span<const EventSpan> spans,
                           const std::vector<std::string>& events, std::size_t frames,
                           double hop_s, std::size_t* clamped) {
  require(hop_s > 0, ErrorCode::kInvalidArgument, "hop must be positive");
  constexpr double kMinOverlap = 1e-9;
  EventRoll roll(events.size(), frames);
  const double clip_end = static_cast<double>(frames) * hop_s;
  for (const auto& s : spans) {
    const auto m = index_in(events, s.label);
    require(m.has_value(), ErrorCode::kInvalidArgument,
            "event label '" + s.label + "' is not in the vocabulary");
    double off = s.offset;
    if (off > clip_end + kMinOverlap) {
      spdlog::warn("event '{}' [{}, {}) runs past the clip end {}; clamped", s.label, s.onset,
                   s.offset, clip_end);
      if (clamped) ++*clamped;
      off = clip_end;
    }
    if (s.onset >= off) continue;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor(s.onset / hop_s) - 1));
    for (std::size_t t = first; t < frames; ++t) {
      const double lo = static_cast<double>(t) * hop_s;
      if (lo >= off) break;
      const double hi = static_cast<double>(t + 1) * hop_s;
      if (std::min(hi, off) - std::max(lo, s.onset) > kMinOverlap) roll.set(*m, t, true);
    }
  }
  return roll;
}

std::vector<EventSpan> spans_from_roll(const EventRoll& roll,
                                       const std::vector<std::string>& events, double hop_s) {
  require(events.size() == roll.events(), ErrorCode::kInvalidArgument,
          "spans_from_roll: vocabulary size differs from the roll");
  std::vector<EventSpan> spans;
  for (std::size_t m = 0; m < roll.events(); ++m) {
    std::size_t t = 0;
    while (t < roll.frames()) {
      if (!roll(m, t)) {
        ++t;
        continue;
      }
      const std::size_t start = t;
      while (t < roll.frames() && roll(m, t)) ++t;
      spans.push_back({static_cast<double>(start) * hop_s, static_cast<double>(t) * hop_s,
                       events[m]});
    }
  }
  std::sort(spans.begin(), spans.end(), [](const EventSpan& a, const EventSpan& b) {
    return std::tie(a.onset, a.label) < std::tie(b.onset, b.label);
  });
  return spans;
}

// ------------------------------------------------------------- synthesis

std::vector<std::string> SynthConfig::event_names() const {
  if (!events.empty()) return events;
  std::vector<std::string> names;
  for (int e = 0; e < 10; ++e) names.push_back(fmt::format("ev{:02d}", e));
  return names;
}

std::vector<std::vector<double>> SynthConfig::prior_matrix() const {
  if (!prior.empty()) return prior;
  const auto ev = event_names();
  std::vector<std::vector<double>> p(scenes.size(), std::vector<double>(ev.size(), p_other));
  for (std::size_t e = 0; e < ev.size(); ++e) p[e % scenes.size()][e] = p_primary;
  return p;
}

void SynthConfig::validate() const {
  require(!scenes.empty(), ErrorCode::kConfig, "synth: at least one scene");
  const auto ev = event_names();
  require(!ev.empty(), ErrorCode::kConfig, "synth: at least one event");
  const auto p = prior_matrix();
  require(p.size() == scenes.size(), ErrorCode::kConfig, "synth: prior needs one row per scene");
  for (const auto& row : p) {
    require(row.size() == ev.size(), ErrorCode::kConfig,
            "synth: prior needs one column per event");
    for (double v : row) {
      require(v >= 0 && v <= 1, ErrorCode::kConfig, "synth: prior entries must lie in [0, 1]");
    }
  }
  require(clip_seconds > 0 && sample_rate > 0, ErrorCode::kConfig,
          "synth: clip length and sample rate must be positive");
  require(mean_event_s > 0, ErrorCode::kConfig, "synth: mean event length must be positive");
  require(features.n_mels >= 2 * ev.size(), ErrorCode::kConfig,
          "synth: need at least two mel bands per event class");
  double sum = 0;
  for (double r : ratios) {
    require(r >= 0, ErrorCode::kConfig, "synth: split ratios must be non-negative");
    sum += r;
  }
  require(std::abs(sum - 1.0) < 1e-9, ErrorCode::kConfig, "synth: split ratios must sum to 1");
}

Band event_band(std::size_t event, std::size_t n_events, std::size_t n_mels) {
  require(event < n_events && n_mels >= 2 * n_events, ErrorCode::kInvalidArgument,
          "event_band: too few mel bands");
  const std::size_t margin = n_mels >= 4 * n_events ? 3 : 0;
  const std::size_t slot = (n_mels - margin - 1) / n_events;
  const std::size_t width = std::max<std::size_t>(1, slot * 2 / 3);
  return {margin + slot * event, width};
}

namespace {

// Two-state Markov chain per event with stationary on-probability p and
// mean on-run `mean_on` frames. The initial state is drawn from the
// stationary distribution.
void draw_activity(EventRoll& roll, std::size_t m, double p, double mean_on, Rng& rng) {
  if (p <= 0) return;
  if (p >= 1) {
    for (std::size_t t = 0; t < roll.frames(); ++t) roll.set(m, t, true);
    return;
  }
  double leave = 1.0 / std::max(1.0, mean_on);
  double enter = leave * p / (1.0 - p);
  if (enter > 1.0) {
    enter = 1.0;
    leave = (1.0 - p) / p;
  }
  bool on = rng.uniform() < p;
  for (std::size_t t = 0; t < roll.frames(); ++t) {
    roll.set(m, t, on);
    on = on ? rng.uniform() >= leave : rng.uniform() < enter;
  }
}

}  // namespace

SynthClip synth_clip(const SynthConfig& cfg, std::size_t index) {
  const auto events = cfg.event_names();
  const auto prior = cfg.prior_matrix();
  const std::size_t n_samples =
      static_cast<std::size_t>(std::llround(cfg.clip_seconds * cfg.sample_rate));
  const FrameGeometry geo =
      frame_geometry(n_samples, cfg.sample_rate, cfg.features.frame_ms, cfg.features.hop_ms);
  const std::size_t frames = cfg.features.pad_to_hop_grid ? geo.padded_frames : geo.raw_frames;
  const double hop_s = static_cast<double>(geo.hop_samples) / cfg.sample_rate;
  const std::size_t d_bins = cfg.features.n_mels;

  Rng rng = Rng(cfg.seed).split("clip").split(static_cast<std::uint64_t>(index));
  SynthClip out;
  out.record.id = fmt::format("clip{:05d}", index);
  const std::size_t scene = rng.index(cfg.scenes.size());
  out.record.scene = cfg.scenes[scene];

  out.roll = EventRoll(events.size(), frames);
  const double mean_on = cfg.mean_event_s / hop_s;
  for (std::size_t m = 0; m < events.size(); ++m) {
    Rng er = rng.split(static_cast<std::uint64_t>(1000 + m));
    draw_activity(out.roll, m, prior[scene][m], mean_on, er);
  }
  out.record.spans = spans_from_roll(out.roll, events, hop_s);

  const std::size_t n_scenes = cfg.scenes.size();
  const double tilt =
      n_scenes > 1 ? -1.5 + 3.0 * static_cast<double>(scene) / static_cast<double>(n_scenes - 1)
                   : 0.0;
  Rng noise = rng.split("noise");
  if (!cfg.render_audio) {
    Tensorf x({d_bins, frames});
    for (std::size_t d = 0; d < d_bins; ++d) {
      const double pos = 2.0 * static_cast<double>(d) / static_cast<double>(d_bins - 1) - 1.0;
      for (std::size_t t = 0; t < frames; ++t) {
        x(d, t) = static_cast<float>(tilt * pos + cfg.noise_std * noise.normal());
      }
    }
    for (std::size_t m = 0; m < events.size(); ++m) {
      const Band band = event_band(m, events.size(), d_bins);
      double gain = 0;
      for (std::size_t t = 0; t < frames; ++t) {
        if (!out.roll(m, t)) {
          gain = 0;
          continue;
        }
        if (gain == 0) gain = cfg.event_gain * noise.uniform(0.8, 1.2);  // new run
        for (std::size_t d = band.lo; d < band.lo + band.width; ++d) {
          x(d, t) += static_cast<float>(gain);
        }
        if (band.lo > 0) x(band.lo - 1, t) += static_cast<float>(0.5 * gain);
        if (band.lo + band.width < d_bins) x(band.lo + band.width, t) += static_cast<float>(0.5 * gain);
      }
    }
    out.features = std::move(x);
    return out;
  }

  // Audio: one-pole coloured noise whose tilt depends on the scene, plus
  // sums of sinusoids inside each event's mel band, gated per frame.
  AudioClip clip;
  clip.sample_rate = cfg.sample_rate;
  clip.samples.assign(n_samples, 0.0);
  const double pole = std::clamp(0.45 * tilt, -0.8, 0.8);
  double state = 0;
  for (auto& s : clip.samples) {
    state = pole * state + noise.normal();
    s = 0.02 * state;
  }
  const auto centers = mel_center_frequencies(cfg.sample_rate, d_bins);
  const std::size_t hop = geo.hop_samples;
  const std::size_t ramp = std::max<std::size_t>(1, hop / 8);
  for (std::size_t m = 0; m < events.size(); ++m) {
    const Band band = event_band(m, events.size(), d_bins);
    const double f_lo = centers[band.lo], f_hi = centers[band.lo + band.width - 1];
    constexpr int kPartials = 6;
    double freq[kPartials], phase[kPartials];
    for (int k = 0; k < kPartials; ++k) {
      freq[k] = noise.uniform(f_lo, std::max(f_lo, f_hi));
      phase[k] = noise.uniform(0, 2 * std::numbers::pi);
    }
    const double amp = 0.05 * noise.uniform(0.8, 1.2) / kPartials;
    double env = 0;
    for (std::size_t n = 0; n < n_samples; ++n) {
      const std::size_t t = std::min(n / hop, frames - 1);
      const double target = out.roll(m, t) ? 1.0 : 0.0;
      env += std::clamp(target - env, -1.0 / ramp, 1.0 / ramp);
      if (env <= 0) continue;
      double v = 0;
      for (int k = 0; k < kPartials; ++k) {
        v += std::sin(2 * std::numbers::pi * freq[k] * static_cast<double>(n) / cfg.sample_rate +
                      phase[k]);
      }
      clip.samples[n] += amp * env * v;
    }
  }
  for (auto& s : clip.samples) s = std::clamp(s, -1.0, 1.0);
  out.audio = std::move(clip);
  return out;
}

std::vector<ClipRecord> synth_corpus(const SynthConfig& cfg, const fs::path& dir) {
  cfg.validate();
  fs::create_directories(dir / "annotations");
  fs::create_directories(dir / (cfg.render_audio ? "audio" : "features"));
  std::vector<ClipRecord> records;
  for (std::size_t i = 0; i < cfg.clips; ++i) {
    SynthClip c = synth_clip(cfg, i);
    ClipRecord rec = c.record;
    rec.annotation = dir / "annotations" / (rec.id + ".txt");
    write_annotation(rec.annotation, rec.spans);
    if (c.features) {
      rec.path = dir / "features" / (rec.id + ".jsfm");
      write_feature_file(rec.path, *c.features);
    } else {
      rec.path = dir / "audio" / (rec.id + ".wav");
      write_wav(rec.path, *c.audio);
    }
    records.push_back(std::move(rec));
  }
  split_corpus(records, cfg.ratios, cfg.seed);
  write_manifest(dir / "manifest.tsv", records);
  return records;
}

void split_corpus(std::vector<ClipRecord>& records, std::array<double, 3> ratios,
                  std::uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    require(r >= 0, ErrorCode::kInvalidArgument, "split ratios must be non-negative");
    sum += r;
  }
  require(std::abs(sum - 1.0) < 1e-9, ErrorCode::kInvalidArgument, "split ratios must sum to 1");
  const std::size_t nonzero =
      static_cast<std::size_t>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0; }));
  require(records.size() >= nonzero, ErrorCode::kInvalidArgument,
          "split_corpus: fewer clips (" + std::to_string(records.size()) + ") than splits (" +
              std::to_string(nonzero) + ")");

  // Largest remainder: floors first, leftover units to the largest fractions.
  auto apportion = [](double total, const std::array<double, 3>& r) {
    std::array<std::size_t, 3> n{};
    std::array<double, 3> frac{};
    std::size_t used = 0;
    for (int k = 0; k < 3; ++k) {
      const double exact = total * r[k];
      n[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      frac[k] = exact - static_cast<double>(n[k]);
      used += n[k];
    }
    const auto want = static_cast<std::size_t>(std::llround(total));
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; used < want; ++i, ++used) ++n[order[i % 3]];
    return std::make_pair(n, frac);
  };

  std::map<std::string, std::vector<std::size_t>> strata;
  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
  for (std::size_t i : idx) strata[records[i].scene].push_back(i);

  const auto [global, unused] = apportion(static_cast<double>(records.size()), ratios);
  (void)unused;

  // Per-stratum floors; the leftover units are then routed so that each
  // (stratum, split) cell gains at most one unit, as a small max-flow from
  // strata to splits. Split capacities start at the global largest-remainder
  // totals and widen to the ceiling of the exact share only if that fails.
  std::vector<std::string> names;
  std::vector<std::array<std::size_t, 3>> quota;
  std::vector<std::array<double, 3>> frac;
  std::vector<std::size_t> leftover;
  std::array<std::size_t, 3> assigned{};
  for (const auto& [scene, members] : strata) {
    std::array<std::size_t, 3> q{};
    std::array<double, 3> f{};
    std::size_t used = 0;
    for (int k = 0; k < 3; ++k) {
      const double exact = static_cast<double>(members.size()) * ratios[k];
      q[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      f[k] = ratios[k] > 0 ? exact - static_cast<double>(q[k]) : -1.0;
      used += q[k];
      assigned[k] += q[k];
    }
    names.push_back(scene);
    quota.push_back(q);
    frac.push_back(f);
    leftover.push_back(members.size() - used);
  }
  const std::size_t S = names.size();
  std::size_t need = 0;
  for (auto l : leftover) need += l;

  auto route = [&](const std::array<std::size_t, 3>& cap) {
    // flow[s][k] in {0, 1}: stratum s gives one extra unit to split k.
    std::vector<std::array<int, 3>> flow(S, std::array<int, 3>{});
    std::vector<std::size_t> out(S, 0);
    std::array<std::size_t, 3> in{};
    std::vector<std::array<int, 3>> order(S);
    for (std::size_t s = 0; s < S; ++s) {
      order[s] = {0, 1, 2};
      std::stable_sort(order[s].begin(), order[s].end(),
                       [&](int a, int b) { return frac[s][a] > frac[s][b]; });
    }
    auto usable = [&](std::size_t s, int k) { return frac[s][k] > 1e-12; };
    // Augmenting paths alternate stratum -> split (unused cell) and
    // split -> stratum (undo a used cell).
    std::function<bool(std::size_t, std::vector<bool>&, std::vector<bool>&)> augment =
        [&](std::size_t s, std::vector<bool>& seen_s, std::vector<bool>& seen_k) -> bool {
      seen_s[s] = true;
      for (int k : order[s]) {
        if (!usable(s, k) || flow[s][k] || seen_k[k]) continue;
        seen_k[k] = true;
        if (in[k] < cap[k]) {
          flow[s][k] = 1;
          ++in[k];
          return true;
        }
        for (std::size_t t = 0; t < S; ++t) {
          if (flow[t][k] && !seen_s[t] && augment(t, seen_s, seen_k)) {
            flow[t][k] = 0;
            flow[s][k] = 1;
            return true;
          }
        }
      }
      return false;
    };
    std::size_t routed = 0;
    for (std::size_t s = 0; s < S; ++s) {
      while (out[s] < leftover[s]) {
        std::vector<bool> seen_s(S, false), seen_k(3, false);
        if (!augment(s, seen_s, seen_k)) break;
        ++out[s];
        ++routed;
      }
    }
    return std::make_pair(routed == need, flow);
  };

  std::array<std::size_t, 3> cap{};
  for (int k = 0; k < 3; ++k) cap[k] = global[k] > assigned[k] ? global[k] - assigned[k] : 0;
  auto [ok, flow] = route(cap);
  if (!ok) {
    for (int k = 0; k < 3; ++k) {
      const double exact = static_cast<double>(records.size()) * ratios[k];
      cap[k] = static_cast<std::size_t>(std::ceil(exact - 1e-9)) - assigned[k];
    }
    std::tie(ok, flow) = route(cap);
  }
  require(ok, ErrorCode::kInternal, "split_corpus: could not apportion the leftover clips");
  std::map<std::string, std::array<std::size_t, 3>> quota_of;
  for (std::size_t s = 0; s < S; ++s) {
    for (int k = 0; k < 3; ++k) quota[s][k] += static_cast<std::size_t>(flow[s][k]);
    quota_of[names[s]] = quota[s];
  }

  const Rng root = Rng(seed).split("split");
  for (auto& [scene, members] : strata) {
    Rng rng = root.split(scene);
    rng.shuffle(std::span<std::size_t>(members));
    std::size_t pos = 0;
    const Split tags[3] = {Split::kTrain, Split::kDev, Split::kEval};
    for (int k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < quota_of[scene][k]; ++j) records[members[pos++]].split = tags[k];
    }
  }
}

}  // namespace jsed
