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

#include "jsed/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "jsed/binio.hpp"

namespace jsed {

namespace {

constexpr int kGridSteps = 100;  // grid k / 100 for k = 1..99

// Compares 2tp / (2tp + fp + fn) of two count triples exactly.
// Returns <0, 0, >0. Zero-denominator F counts as 0.
int compare_f(const Counts& a, const Counts& b) {
  const std::uint64_t na = 2 * a.tp, da = 2 * a.tp + a.fp + a.fn;
  const std::uint64_t nb = 2 * b.tp, db = 2 * b.tp + b.fp + b.fn;
  if (da == 0 && db == 0) return 0;
  if (da == 0) return nb == 0 ? 0 : -1;
  if (db == 0) return na == 0 ? 0 : 1;
  const unsigned __int128 lhs = static_cast<unsigned __int128>(na) * db;
  const unsigned __int128 rhs = static_cast<unsigned __int128>(nb) * da;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<double> threshold_grid() {
  std::vector<double> grid;
  for (int k = 1; k < kGridSteps; ++k) grid.push_back(k / static_cast<double>(kGridSteps));
  return grid;
}

Thresholds tune_thresholds(std::span<const Tensorf> dev_scores,
                           std::span<const EventRoll> dev_targets) {
  require(!dev_scores.empty(), ErrorCode::kInvalidArgument,
          "tune_thresholds: empty dev set");
  require(dev_scores.size() == dev_targets.size(), ErrorCode::kInvalidArgument,
          "tune_thresholds: score and target lists differ in length");
  const std::size_t m_events = dev_targets[0].events();
  for (std::size_t i = 0; i < dev_scores.size(); ++i) {
    const auto& s = dev_scores[i];
    const auto& z = dev_targets[i];
    require(s.rank() == 2 && s.dim(0) == z.events() && s.dim(1) == z.frames() &&
                z.events() == m_events,
            ErrorCode::kShape, "tune_thresholds: clip " + std::to_string(i) +
                                   " scores " + shape_string(s.shape()) +
                                   " do not match its target roll");
  }
  const auto grid = threshold_grid();
  Thresholds out;
  out.theta.assign(m_events, 0.5);
  for (std::size_t m = 0; m < m_events; ++m) {
    std::vector<Counts> per_theta(grid.size());
    std::uint64_t active = 0;
    for (std::size_t i = 0; i < dev_scores.size(); ++i) {
      const auto& s = dev_scores[i];
      const auto& z = dev_targets[i];
      for (std::size_t t = 0; t < z.frames(); ++t) {
        const double score = s(m, t);
        const bool ref = z(m, t) != 0;
        active += ref;
        for (std::size_t k = 0; k < grid.size(); ++k) {
          const bool hyp = score > grid[k];
          per_theta[k].tp += hyp && ref;
          per_theta[k].fp += hyp && !ref;
          per_theta[k].fn += !hyp && ref;
        }
      }
    }
    if (active == 0) continue;
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const int c = compare_f(per_theta[k], per_theta[best]);
      if (c > 0) {
        best = k;
      } else if (c == 0) {
        // Grid index k corresponds to (k + 1) / 100; 0.5 sits at index 49.
        const auto dist = [](std::size_t idx) {
          return idx > 49 ? idx - 49 : 49 - idx;
        };
        if (dist(k) < dist(best)) best = k;  // equal distance keeps the smaller
      }
    }
    out.theta[m] = grid[best];
  }
  return out;
}

EventRoll binarize(const Tensorf& scores, const Thresholds& thresholds) {
  require(scores.rank() == 2 && scores.dim(0) == thresholds.theta.size(),
          ErrorCode::kShape, "binarize: scores " + shape_string(scores.shape()) +
                                 " vs " + std::to_string(thresholds.theta.size()) +
                                 " thresholds");
  EventRoll roll(scores.dim(0), scores.dim(1));
  for (std::size_t m = 0; m < roll.events(); ++m) {
    for (std::size_t t = 0; t < roll.frames(); ++t) {
      roll.set(m, t, static_cast<double>(scores(m, t)) > thresholds.theta[m]);
    }
  }
  return roll;
}

Prf prf(const Counts& c) {
  Prf r;
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.f = (r.precision + r.recall) > 0
            ? 2 * r.precision * r.recall / (r.precision + r.recall)
            : 0.0;
  return r;
}

ErrorRate error_rate(std::span<const FrameTally> frames) {
  ErrorRate r;
  for (const auto& k : frames) {
    r.substitutions += std::min(k.fn, k.fp);
    r.deletions += k.fn > k.fp ? k.fn - k.fp : 0;
    r.insertions += k.fp > k.fn ? k.fp - k.fn : 0;
    r.reference += k.n;
  }
  if (r.reference > 0) {
    r.er = static_cast<double>(r.substitutions + r.deletions + r.insertions) /
           static_cast<double>(r.reference);
  }
  return r;
}

EventRoll to_segments(const EventRoll& roll, std::size_t segment) {
  require(segment > 0, ErrorCode::kInvalidArgument, "segment length must be positive");
  if (segment == 1) return roll;
  const std::size_t n_seg = (roll.frames() + segment - 1) / segment;
  EventRoll out(roll.events(), n_seg);
  for (std::size_t m = 0; m < roll.events(); ++m) {
    for (std::size_t t = 0; t < roll.frames(); ++t) {
      if (roll(m, t)) out.set(m, t / segment, true);
    }
  }
  return out;
}

Counts FrameCounts::total() const {
  Counts c;
  for (const auto& e : per_event) c += e;
  return c;
}

FrameCounts count_frames(const EventRoll& pred, const EventRoll& target) {
  require(pred.same_shape(target), ErrorCode::kShape,
          "count_frames: prediction and reference rolls differ in shape");
  FrameCounts fc;
  fc.per_event.resize(pred.events());
  fc.per_frame.resize(pred.frames());
  for (std::size_t m = 0; m < pred.events(); ++m) {
    for (std::size_t t = 0; t < pred.frames(); ++t) {
      const bool hyp = pred(m, t) != 0, ref = target(m, t) != 0;
      fc.per_event[m].tp += hyp && ref;
      fc.per_event[m].fp += hyp && !ref;
      fc.per_event[m].fn += !hyp && ref;
      fc.per_frame[t].fp += hyp && !ref;
      fc.per_frame[t].fn += !hyp && ref;
      fc.per_frame[t].n += ref;
    }
  }
  return fc;
}

std::vector<double> false_positive_rate(std::span<const EventRoll> preds,
                                        std::span<const EventRoll> targets) {
  require(preds.size() == targets.size(), ErrorCode::kInvalidArgument,
          "false_positive_rate: list lengths differ");
  require(!preds.empty(), ErrorCode::kInvalidArgument, "false_positive_rate: no frames");
  const std::size_t m_events = preds[0].events();
  std::vector<std::uint64_t> fp(m_events, 0);
  std::uint64_t frames = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require(preds[i].same_shape(targets[i]) && preds[i].events() == m_events,
            ErrorCode::kShape, "false_positive_rate: roll shapes differ");
    frames += preds[i].frames();
    for (std::size_t m = 0; m < m_events; ++m) {
      for (std::size_t t = 0; t < preds[i].frames(); ++t) {
        fp[m] += preds[i](m, t) && !targets[i](m, t);
      }
    }
  }
  require(frames > 0, ErrorCode::kInvalidArgument, "false_positive_rate: no frames");
  std::vector<double> out(m_events);
  for (std::size_t m = 0; m < m_events; ++m) out[m] = ratio(fp[m], frames);
  return out;
}

SceneEval scene_eval(std::span<const std::size_t> preds,
                     std::span<const std::size_t> targets, std::size_t n_scenes) {
  require(!preds.empty(), ErrorCode::kInvalidArgument, "scene_eval: empty input");
  require(preds.size() == targets.size(), ErrorCode::kInvalidArgument,
          "scene_eval: list lengths differ");
  SceneEval ev;
  ev.confusion.assign(n_scenes, std::vector<std::uint64_t>(n_scenes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require(preds[i] < n_scenes && targets[i] < n_scenes, ErrorCode::kInvalidArgument,
            "scene_eval: scene index out of range");
    ++ev.confusion[targets[i]][preds[i]];
    if (preds[i] == targets[i]) {
      ++ev.counts.tp;
    } else {
      ++ev.counts.fp;  // counted against the predicted scene
      ++ev.counts.fn;  // and missed for the true one
    }
  }
  ev.prf = prf(ev.counts);
  for (std::size_t s = 0; s < n_scenes; ++s) {
    std::uint64_t row = 0;
    for (auto v : ev.confusion[s]) row += v;
    ev.recall.push_back(row ? std::optional<double>(ratio(ev.confusion[s][s], row))
                            : std::nullopt);
  }
  return ev;
}

EvalReport build_report(std::span<const ClipOutcome> clips,
                        const std::vector<std::string>& events,
                        const std::vector<std::string>& scenes, std::size_t segment) {
  require(!clips.empty(), ErrorCode::kInvalidArgument, "evaluation set is empty");
  EvalReport rep;
  rep.events = events;
  rep.scenes = scenes;
  rep.segment = segment;
  rep.clips = clips.size();
  rep.has_events = clips[0].pred_roll.has_value();
  rep.has_scenes = clips[0].pred_scene.has_value();

  if (rep.has_events) {
    const std::size_t m_events = events.size();
    rep.per_event_counts.assign(m_events, {});
    std::vector<std::vector<FrameTally>> per_event_frames(m_events);
    std::vector<FrameTally> all_frames;
    std::vector<std::vector<EventRoll>> by_scene_pred(scenes.size()),
        by_scene_ref(scenes.size());
    for (const auto& c : clips) {
      require(c.pred_roll && c.target_roll, ErrorCode::kInvalidArgument,
              "clip " + c.clip_id + " lacks an event roll");
      const EventRoll pred = to_segments(*c.pred_roll, segment);
      const EventRoll ref = to_segments(*c.target_roll, segment);
      require(pred.events() == m_events, ErrorCode::kShape,
              "clip " + c.clip_id + " roll has the wrong number of events");
      const FrameCounts fc = count_frames(pred, ref);
      for (std::size_t m = 0; m < m_events; ++m) {
        rep.per_event_counts[m] += fc.per_event[m];
        for (std::size_t t = 0; t < pred.frames(); ++t) {
          const bool hyp = pred(m, t) != 0, r = ref(m, t) != 0;
          per_event_frames[m].push_back({static_cast<std::uint64_t>(hyp && !r),
                                         static_cast<std::uint64_t>(!hyp && r),
                                         static_cast<std::uint64_t>(r)});
        }
      }
      all_frames.insert(all_frames.end(), fc.per_frame.begin(), fc.per_frame.end());
      by_scene_pred.at(c.true_scene).push_back(pred);
      by_scene_ref.at(c.true_scene).push_back(ref);
    }
    for (const auto& c : rep.per_event_counts) {
      rep.event_counts += c;
      rep.per_event_prf.push_back(prf(c));
    }
    rep.event_prf = prf(rep.event_counts);
    rep.event_er = error_rate(all_frames);
    for (const auto& f : per_event_frames) rep.per_event_er.push_back(error_rate(f));
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      std::vector<std::optional<double>> row(m_events);
      if (!by_scene_pred[s].empty()) {
        const auto v = false_positive_rate(by_scene_pred[s], by_scene_ref[s]);
        for (std::size_t m = 0; m < m_events; ++m) row[m] = v[m];
      }
      rep.fpr.push_back(std::move(row));
    }
  }

  if (rep.has_scenes) {
    std::vector<std::size_t> preds, refs;
    for (const auto& c : clips) {
      require(c.pred_scene.has_value(), ErrorCode::kInvalidArgument,
              "clip " + c.clip_id + " lacks a scene prediction");
      preds.push_back(*c.pred_scene);
      refs.push_back(c.true_scene);
    }
    rep.scene = scene_eval(preds, refs, scenes.size());
  }
  return rep;
}

namespace {

nlohmann::json counts_json(const Counts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f", p.f}};
}

nlohmann::json er_json(const ErrorRate& e) {
  nlohmann::json j = {{"substitutions", e.substitutions},
                      {"deletions", e.deletions},
                      {"insertions", e.insertions},
                      {"reference", e.reference}};
  j["er"] = e.er ? nlohmann::json(*e.er) : nlohmann::json(nullptr);
  return j;
}

std::string pct(double v) { return fmt::format("{:6.2f}", 100.0 * v); }

std::string opt_pct(const std::optional<double>& v) {
  return v ? pct(*v) : std::string("     -");
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["clips"] = clips;
  j["segment_frames"] = segment;
  j["events"] = events;
  j["scenes"] = scenes;
  if (has_events) {
    nlohmann::json ev;
    ev["counts"] = counts_json(event_counts);
    ev["prf"] = prf_json(event_prf);
    ev["error_rate"] = er_json(event_er);
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t m = 0; m < events.size(); ++m) {
      per.push_back({{"event", events[m]},
                     {"counts", counts_json(per_event_counts[m])},
                     {"prf", prf_json(per_event_prf[m])},
                     {"error_rate", er_json(per_event_er[m])}});
    }
    ev["per_event"] = per;
    nlohmann::json fj = nlohmann::json::object();
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      nlohmann::json row = nlohmann::json::object();
      for (std::size_t m = 0; m < events.size(); ++m) {
        row[events[m]] = fpr[s][m] ? nlohmann::json(*fpr[s][m]) : nlohmann::json(nullptr);
      }
      fj[scenes[s]] = row;
    }
    ev["fpr"] = fj;
    j["event"] = ev;
  }
  if (has_scenes) {
    nlohmann::json sc;
    sc["counts"] = counts_json(scene.counts);
    sc["prf"] = prf_json(scene.prf);
    sc["confusion"] = scene.confusion;
    nlohmann::json rec = nlohmann::json::object();
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      rec[scenes[s]] =
          scene.recall[s] ? nlohmann::json(*scene.recall[s]) : nlohmann::json(nullptr);
    }
    sc["recall"] = rec;
    j["scene"] = sc;
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << fmt::format("clips: {}   segment: {} frame(s)\n\n", clips, segment);
  std::size_t w = 12;
  for (const auto& e : events) w = std::max(w, e.size() + 2);
  for (const auto& s : scenes) w = std::max(w, s.size() + 2);
  if (has_events) {
    os << fmt::format("event F-score (%) {}   ER {}\n\n", pct(event_prf.f),
                      event_er.er ? fmt::format("{:.4f}", *event_er.er) : "n/a");
    os << fmt::format("{:<{}}{:>9}{:>9}{:>9}{:>9}\n", "event", w, "P(%)", "R(%)", "F(%)",
                      "ER");
    for (std::size_t m = 0; m < events.size(); ++m) {
      const auto& p = per_event_prf[m];
      const auto& e = per_event_er[m];
      os << fmt::format("{:<{}}{:>9}{:>9}{:>9}{:>9}\n", events[m], w, pct(p.precision),
                        pct(p.recall), pct(p.f),
                        e.er ? fmt::format("{:.4f}", *e.er) : "n/a");
    }
    os << "\nfalse positive rate (%) per scene and event\n";
    os << fmt::format("{:<{}}", "event", w);
    for (const auto& s : scenes) os << fmt::format("{:>{}}", s, w);
    os << '\n';
    for (std::size_t m = 0; m < events.size(); ++m) {
      os << fmt::format("{:<{}}", events[m], w);
      for (std::size_t s = 0; s < scenes.size(); ++s) {
        os << fmt::format("{:>{}}", opt_pct(fpr[s][m]), w);
      }
      os << '\n';
    }
    os << '\n';
  }
  if (has_scenes) {
    os << fmt::format("scene F-score (%) {}\n\n", pct(scene.prf.f));
    os << fmt::format("{:<{}}", "true \\ pred", w);
    for (const auto& s : scenes) os << fmt::format("{:>{}}", s, w);
    os << fmt::format("{:>{}}\n", "recall(%)", w);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      os << fmt::format("{:<{}}", scenes[i], w);
      for (auto v : scene.confusion[i]) os << fmt::format("{:>{}}", v, w);
      os << fmt::format("{:>{}}\n", opt_pct(scene.recall[i]), w);
    }
  }
  return os.str();
}

void write_roll_file(const std::filesystem::path& path, std::span<const NamedRoll> rolls) {
  std::string out;
  for (const auto& [id, roll] : rolls) {
    require(id.find_first_of("\t\n") == std::string::npos, ErrorCode::kInvalidArgument,
            "clip id contains a tab or newline: " + id);
    for (std::size_t t = 0; t < roll.frames(); ++t) {
      out += id;
      out += '\t';
      out += std::to_string(t);
      out += '\t';
      for (std::size_t m = 0; m < roll.events(); ++m) {
        if (m) out += ' ';
        out += roll(m, t) ? '1' : '0';
      }
      out += '\n';
    }
  }
  binio::write_text(path, out);
}

std::vector<NamedRoll> read_roll_file(const std::filesystem::path& path) {
  std::istringstream is(binio::read_text(path));
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<std::uint8_t>>> frames;
  std::string line;
  std::size_t lineno = 0, m_events = 0;
  bool have_m = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    require(tab2 != std::string::npos, ErrorCode::kFormat, where + ": expected 3 fields");
    const std::string id = line.substr(0, tab1);
    std::size_t frame = 0;
    try {
      frame = std::stoul(line.substr(tab1 + 1, tab2 - tab1 - 1));
    } catch (const std::exception&) {
      fail(ErrorCode::kFormat, where + ": bad frame index");
    }
    std::vector<std::uint8_t> bits;
    std::istringstream bs(line.substr(tab2 + 1));
    std::string tok;
    while (bs >> tok) {
      require(tok == "0" || tok == "1", ErrorCode::kFormat, where + ": bits must be 0 or 1");
      bits.push_back(tok == "1");
    }
    if (!have_m) {
      m_events = bits.size();
      have_m = true;
    }
    require(bits.size() == m_events, ErrorCode::kFormat,
            where + ": inconsistent number of events");
    auto [it, inserted] = frames.try_emplace(id);
    if (inserted) order.push_back(id);
    require(frame == it->second.size(), ErrorCode::kFormat,
            where + ": frames of clip " + id + " must be consecutive from 0");
    it->second.push_back(std::move(bits));
  }
  std::vector<NamedRoll> out;
  for (const auto& id : order) {
    const auto& fr = frames[id];
    EventRoll roll(m_events, fr.size());
    for (std::size_t t = 0; t < fr.size(); ++t) {
      for (std::size_t m = 0; m < m_events; ++m) roll.set(m, t, fr[t][m] != 0);
    }
    out.emplace_back(id, std::move(roll));
  }
  return out;
}

}  // namespace jsed
