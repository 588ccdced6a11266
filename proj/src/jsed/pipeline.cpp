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

#include "jsed/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "jsed/binio.hpp"
#include "jsed/digest.hpp"
#include "jsed/metrics.hpp"

namespace jsed {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kResolvedConfig = "resolved_config.txt";

void echo_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  binio::write_text(dir / kResolvedConfig, cfg.resolved_text());
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t file_digest(const fs::path& p) {
  const auto bytes = binio::read_file(p);
  return Fnv1a().update(bytes.data(), bytes.size()).value();
}

std::optional<std::string> read_marker(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  std::string s = binio::read_text(p);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

json feature_json(const FeatureParams& p) {
  return {{"frame_ms", p.frame_ms}, {"hop_ms", p.hop_ms}, {"n_mels", p.n_mels},
          {"log_floor", p.log_floor}, {"pad_to_hop_grid", p.pad_to_hop_grid}};
}

// ------------------------------------------------------------------ data

bool is_feature_file(const fs::path& p) { return p.extension() == ".jsfm"; }

fs::path manifest_path(const RunConfig& cfg, const fs::path& out) {
  const std::string m = cfg.get_string("manifest");
  if (!m.empty()) return m;
  const fs::path synth = out / "data" / "manifest.tsv";
  require(fs::exists(synth), ErrorCode::kConfig,
          "no manifest: set 'manifest' in the config or run synth-data first");
  return synth;
}

Manifest load_config_manifest(const RunConfig& cfg, const fs::path& out) {
  const auto fixed = cfg.fixed_vocabulary();
  return load_manifest(manifest_path(cfg, out), fixed ? &*fixed : nullptr);
}

fs::path feature_path_for(const ClipRecord& rec, const fs::path& out) {
  return is_feature_file(rec.path) ? rec.path : out / "features" / (rec.id + ".jsfm");
}

struct Corpus {
  Manifest manifest;
  std::vector<Tensorf> features;  // raw, [D, T]
  std::vector<EventRoll> rolls;
  std::vector<std::size_t> scenes;
  std::uint64_t digest = 0;
  std::size_t mel_bins = 0;
  std::size_t frames = 0;

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.clips.size(); ++i) {
      if (manifest.clips[i].split == s) out.push_back(i);
    }
    return out;
  }
};

Corpus load_corpus(const RunConfig& cfg, const fs::path& out) {
  Corpus c;
  c.manifest = load_config_manifest(cfg, out);
  auto& clips = c.manifest.clips;
  require(!clips.empty(), ErrorCode::kInvalidArgument, "the manifest lists no clips");
  const std::size_t tagged = static_cast<std::size_t>(std::count_if(
      clips.begin(), clips.end(), [](const ClipRecord& r) { return r.split != Split::kUnassigned; }));
  if (tagged == 0) {
    split_corpus(clips, cfg.split_ratios(), static_cast<std::uint64_t>(cfg.get_int("seed")));
  } else {
    require(tagged == clips.size(), ErrorCode::kFormat,
            "either every manifest row carries a split tag or none does");
  }
  const FeatureParams fp = cfg.feature_params();
  const double hop_s = fp.hop_ms / 1000.0;
  Fnv1a h;
  for (const auto& s : c.manifest.vocab.scenes) h.update(s).update("\n");
  for (const auto& e : c.manifest.vocab.events) h.update(e).update("\n");
  std::size_t clamped = 0;
  for (const auto& rec : clips) {
    const fs::path fpath = feature_path_for(rec, out);
    require(fs::exists(fpath), ErrorCode::kNotFound,
            "features for clip " + rec.id + " not found at " + fpath.string() +
                " (run extract-features first)");
    const auto bytes = binio::read_file(fpath);
    h.update(rec.id).update("|").update(rec.scene).update("|").update(split_name(rec.split));
    h.update(bytes.data(), bytes.size());
    for (const auto& s : rec.spans) {
      h.update_pod(s.onset).update_pod(s.offset).update(s.label);
    }
    Tensorf x = read_feature_file(fpath);
    if (c.features.empty()) {
      c.mel_bins = x.dim(0);
      c.frames = x.dim(1);
    }
    require(x.dim(0) == c.mel_bins && x.dim(1) == c.frames, ErrorCode::kShape,
            "clip " + rec.id + " features are " + shape_string(x.shape()) + ", expected [" +
                std::to_string(c.mel_bins) + ", " + std::to_string(c.frames) + "]");
    c.rolls.push_back(make_target_roll(rec.spans, c.manifest.vocab.events, c.frames, hop_s, &clamped));
    c.scenes.push_back(*c.manifest.vocab.scene_index(rec.scene));
    c.features.push_back(std::move(x));
  }
  if (clamped) spdlog::warn("{} event span(s) clamped to the clip end", clamped);
  c.digest = h.value();
  return c;
}

Standardizer fit_norm(const Corpus& c) {
  std::vector<const Tensorf*> feats;
  for (std::size_t i : c.indices(Split::kTrain)) feats.push_back(&c.features[i]);
  require(!feats.empty(), ErrorCode::kInvalidArgument, "the training split is empty");
  return Standardizer::fit(feats);
}

std::vector<std::string> run_dirs_of(const CommandOptions& opts) {
  std::vector<std::string> dirs;
  if (!opts.run_dirs.empty()) {
    for (const auto& d : opts.run_dirs) dirs.push_back(d.string());
    return dirs;
  }
  const fs::path runs = opts.out / "runs";
  if (!fs::exists(runs)) return dirs;
  for (const auto& e : fs::directory_iterator(runs)) {
    if (e.is_directory() && fs::exists(e.path() / "done")) dirs.push_back(e.path().string());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// ------------------------------------------------------------ checkpoint

void add_norm(std::map<std::string, Tensorf>& t, const Standardizer& norm) {
  const std::size_t d = norm.mean().size();
  Tensorf mean({d}), stddev({d});
  for (std::size_t i = 0; i < d; ++i) {
    mean[i] = static_cast<float>(norm.mean()[i]);
    stddev[i] = static_cast<float>(norm.stddev()[i]);
  }
  t["norm.mean"] = mean;
  t["norm.std"] = stddev;
}

Standardizer read_norm(const std::map<std::string, Tensorf>& t) {
  const auto m = t.find("norm.mean"), s = t.find("norm.std");
  require(m != t.end() && s != t.end(), ErrorCode::kFormat, "checkpoint lacks normalization");
  std::vector<double> mean(m->second.values().begin(), m->second.values().end());
  std::vector<double> stddev(s->second.values().begin(), s->second.values().end());
  return Standardizer(std::move(mean), std::move(stddev));
}

}  // namespace

json model_config_json(const ModelConfig& c) {
  auto convs = [](const std::vector<ConvSpec>& v) {
    json a = json::array();
    for (const auto& s : v) a.push_back({s.channels, s.pool.freq, s.pool.time});
    return a;
  };
  return {{"n_events", c.n_events}, {"n_scenes", c.n_scenes}, {"mel_bins", c.mel_bins},
          {"frames", c.frames},     {"shared", convs(c.shared)}, {"scene", convs(c.scene)},
          {"scene_fc", c.scene_fc}, {"gru_units", c.gru_units}, {"event_fc", c.event_fc}};
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    auto convs = [](const json& a) {
      std::vector<ConvSpec> v;
      for (const auto& s : a) {
        v.push_back({s.at(0).get<std::size_t>(), {s.at(1).get<std::size_t>(), s.at(2).get<std::size_t>()}});
      }
      return v;
    };
    c.n_events = j.at("n_events").get<std::size_t>();
    c.n_scenes = j.at("n_scenes").get<std::size_t>();
    c.mel_bins = j.at("mel_bins").get<std::size_t>();
    c.frames = j.at("frames").get<std::size_t>();
    c.shared = convs(j.at("shared"));
    c.scene = convs(j.at("scene"));
    c.scene_fc = j.at("scene_fc").get<std::size_t>();
    c.gru_units = j.at("gru_units").get<std::size_t>();
    c.event_fc = j.at("event_fc").get<std::size_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed model description: ") + e.what());
  }
}

LoadedModel load_model(const fs::path& ckpt_path) {
  require(fs::exists(ckpt_path), ErrorCode::kNotFound, "missing checkpoint " + ckpt_path.string());
  Checkpoint raw = read_checkpoint(ckpt_path);
  json meta;
  try {
    meta = json::parse(raw.meta);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, ckpt_path.string() + ": bad metadata: " + e.what());
  }
  LoadedModel lm;
  const ModelKind kind = parse_model_kind(meta.at("kind").get<std::string>());
  const ModelConfig cfg = model_config_from_json(meta.at("model"));
  require(raw.digest == config_digest(kind, cfg), ErrorCode::kFormat,
          ckpt_path.string() + ": config digest does not match the stored architecture");
  lm.net = Network<float>::build(kind, cfg, 0);
  import_state(lm.net, raw.tensors);
  lm.norm = read_norm(raw.tensors);
  lm.events = meta.value("events", std::vector<std::string>{});
  lm.scenes = meta.value("scenes", std::vector<std::string>{});
  lm.meta = std::move(meta);
  return lm;
}

std::string run_name(ModelKind kind, double beta, std::uint64_t seed) {
  if (kind == ModelKind::kProposed) {
    return fmt::format("{}_b{}_s{}", model_kind_name(kind), format_real(beta), seed);
  }
  return fmt::format("{}_s{}", model_kind_name(kind), seed);
}

RunConfig resolve_config(const CommandOptions& opts) {
  RunConfig cfg = opts.config ? RunConfig::load(*opts.config) : RunConfig();
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos, ErrorCode::kConfig,
            "override '" + kv + "' must look like key=value");
    std::string key = kv.substr(0, eq);
    key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
    cfg.set(key, kv.substr(eq + 1));
  }
  if (opts.seed) {
    cfg.set("seed", std::to_string(*opts.seed));
    cfg.set("train.seeds", std::to_string(*opts.seed));
  }
  return cfg;
}

// ------------------------------------------------------------- commands

json cmd_synth_data(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const SynthConfig sc = cfg.synth_config();
  const fs::path dir = opts.out / "data";
  Fnv1a h;
  for (const char* key : {"seed", "split.ratios", "feature.frame_ms", "feature.hop_ms",
                          "feature.n_mels", "feature.pad_to_hop_grid"}) {
    h.update(key).update("=").update(cfg.raw(key)).update("\n");
  }
  for (const auto& k : RunConfig::known_keys()) {
    if (k.rfind("synth.", 0) == 0) h.update(k).update("=").update(cfg.raw(k)).update("\n");
  }
  const std::string digest = hex(h.value());
  json summary = {{"command", "synth-data"}, {"dir", dir.string()}, {"clips", sc.clips}};
  if (read_marker(dir / "synth.digest") == digest && fs::exists(dir / "manifest.tsv")) {
    summary["cached"] = true;
    return summary;
  }
  echo_config(cfg, dir);
  const auto records = synth_corpus(sc, dir);
  std::map<std::string, std::size_t> per_split;
  for (const auto& r : records) ++per_split[split_name(r.split)];
  binio::write_text(dir / "synth.digest", digest + "\n");
  summary["cached"] = false;
  summary["splits"] = per_split;
  summary["manifest"] = (dir / "manifest.tsv").string();
  return summary;
}

json cmd_extract_features(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const FeatureParams fp = cfg.feature_params();
  const fs::path dir = opts.out / "features";
  const Manifest m = load_config_manifest(cfg, opts.out);
  echo_config(cfg, dir);
  const std::string params = feature_json(fp).dump();
  std::size_t extracted = 0, cached = 0, direct = 0;
  for (const auto& rec : m.clips) {
    if (is_feature_file(rec.path)) {
      require(fs::exists(rec.path), ErrorCode::kNotFound, "missing feature file " + rec.path.string());
      ++direct;
      continue;
    }
    const fs::path target = dir / (rec.id + ".jsfm");
    const fs::path marker = dir / (rec.id + ".digest");
    const std::string digest =
        hex(Fnv1a().update(params).update("|").update(hex(file_digest(rec.path))).value());
    if (fs::exists(target) && read_marker(marker) == digest) {
      ++cached;
      continue;
    }
    AudioClip clip;
    try {
      clip = read_wav(rec.path);
    } catch (const Error& e) {
      fail(e.code(), "clip " + rec.id + ": " + e.what());
    }
    const LogMelSpec spec = extract_log_mel(clip, fp);
    write_feature_file(target, spec.values);
    binio::write_text(marker, digest + "\n");
    ++extracted;
  }
  spdlog::info("features: {} extracted, {} unchanged, {} supplied as feature maps", extracted,
               cached, direct);
  return {{"command", "extract-features"}, {"dir", dir.string()}, {"extracted", extracted},
          {"cached", cached}, {"feature_maps", direct}};
}

namespace {

struct RunSpec {
  ModelKind kind;
  double beta;
  std::uint64_t seed;
};

std::string history_line(const EpochRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"epoch", r.epoch},
            {"steps", r.steps},
            {"loss_total", r.loss_total},
            {"loss_event", r.loss_event},
            {"loss_scene", r.loss_scene},
            {"dev_event_f", opt(r.dev.event_f)},
            {"dev_event_er", opt(r.dev.event_er)},
            {"dev_scene_f", opt(r.dev.scene_f)},
            {"selection", r.selection},
            {"best", r.best},
            {"seconds", r.seconds}};
  return j.dump();
}

EpochRecord parse_history_line(const std::string& line) {
  const json j = json::parse(line);
  auto opt = [&](const char* k) -> std::optional<double> {
    return j.at(k).is_null() ? std::nullopt : std::optional<double>(j.at(k).get<double>());
  };
  EpochRecord r;
  r.epoch = j.at("epoch");
  r.steps = j.at("steps");
  r.loss_total = j.at("loss_total");
  r.loss_event = j.at("loss_event");
  r.loss_scene = j.at("loss_scene");
  r.dev = {opt("dev_event_f"), opt("dev_event_er"), opt("dev_scene_f")};
  r.selection = j.at("selection");
  r.best = j.at("best");
  r.seconds = j.at("seconds");
  return r;
}

json run_meta(const RunSpec& spec, const ModelConfig& mc, const Corpus& corpus,
              const FeatureParams& fp, const std::string& run_digest) {
  return {{"kind", model_kind_name(spec.kind)},
          {"model", model_config_json(mc)},
          {"events", corpus.manifest.vocab.events},
          {"scenes", corpus.manifest.vocab.scenes},
          {"feature", feature_json(fp)},
          {"beta", spec.kind == ModelKind::kProposed ? json(spec.beta) : json(nullptr)},
          {"seed", spec.seed},
          {"run_digest", run_digest}};
}

void save_ckpt(const fs::path& path, const TrainState<float>& st, const Standardizer& norm,
               json meta, bool with_optimizer) {
  Checkpoint ck;
  ck.digest = config_digest(st.net.kind(), st.net.config());
  meta["epochs_done"] = st.epochs_done;
  meta["best_epoch"] = st.best_epoch;
  meta["best_score"] = st.best_score ? json(*st.best_score) : json(nullptr);
  ck.meta = meta.dump();
  export_state(st.net, ck.tensors);
  add_norm(ck.tensors, norm);
  if (with_optimizer) st.opt.export_state(ck.tensors);
  write_checkpoint(path, ck);
}

json execute_run(const RunSpec& spec, const RunConfig& cfg, const Corpus& corpus,
                 const Standardizer& norm, const std::vector<Tensorf>& normed,
                 const fs::path& runs_root) {
  const std::string name = run_name(spec.kind, spec.beta, spec.seed);
  const fs::path dir = runs_root / name;
  const FeatureParams fp = cfg.feature_params();
  const ModelConfig mc =
      cfg.model_config(corpus.manifest.vocab.events.size(), corpus.manifest.vocab.scenes.size(),
                       corpus.mel_bins, corpus.frames);
  const TrainConfig tc = cfg.train_config(spec.beta, spec.seed);

  Fnv1a h;
  h.update(model_kind_name(spec.kind)).update("|").update(mc.canonical()).update("|");
  h.update(hex(corpus.digest)).update("|").update(feature_json(fp).dump()).update("|");
  h.update(fmt::format("alpha={} beta={} lr={} b1={} b2={} eps={} batch={} epochs={} max_steps={} seed={}",
                       tc.weights.alpha, spec.kind == ModelKind::kProposed ? spec.beta : 0.0,
                       tc.adam.lr, tc.adam.beta1, tc.adam.beta2, tc.adam.eps, tc.batch_size,
                       tc.epochs, tc.max_steps, tc.seed));
  const std::string digest = hex(h.value());
  const json meta = run_meta(spec, mc, corpus, fp, digest);
  json summary = {{"run", name}, {"dir", dir.string()}};

  if (read_marker(dir / "done") == digest) {
    summary["status"] = "cached";
    return summary;
  }
  fs::create_directories(dir);
  echo_config(cfg, dir);
  binio::write_text(dir / "run.json", meta.dump(2) + "\n");

  TrainState<float> st =
      init_train_state(Network<float>::build(spec.kind, mc, spec.seed), tc);
  bool resumed = false;
  if (fs::exists(dir / "last.ckpt")) {
    try {
      const Checkpoint ck = read_checkpoint(dir / "last.ckpt");
      const json m = json::parse(ck.meta);
      if (m.value("run_digest", "") == digest && ck.digest == config_digest(spec.kind, mc)) {
        import_state(st.net, ck.tensors);
        st.opt.import_state(ck.tensors);
        st.epochs_done = m.at("epochs_done");
        st.best_epoch = m.at("best_epoch");
        if (!m.at("best_score").is_null()) st.best_score = m.at("best_score").get<double>();
        std::istringstream hs(binio::read_text(dir / "history.jsonl"));
        std::string line;
        while (std::getline(hs, line) && st.history.size() < st.epochs_done) {
          if (!line.empty()) st.history.push_back(parse_history_line(line));
        }
        require(st.history.size() == st.epochs_done, ErrorCode::kFormat, "history shorter than checkpoint");
        resumed = true;
        spdlog::info("{}: resuming after epoch {}", name, st.epochs_done);
      }
    } catch (const std::exception& e) {
      spdlog::warn("{}: cannot resume ({}); starting over", name, e.what());
      st = init_train_state(Network<float>::build(spec.kind, mc, spec.seed), tc);
    }
  }
  if (!resumed) {
    for (const char* f : {"history.jsonl", "best.ckpt", "last.ckpt"}) fs::remove(dir / f);
  }

  std::vector<Example> train_set, dev_set;
  for (std::size_t i : corpus.indices(Split::kTrain)) {
    train_set.push_back({&normed[i], &corpus.rolls[i], corpus.scenes[i]});
  }
  for (std::size_t i : corpus.indices(Split::kDev)) {
    dev_set.push_back({&normed[i], &corpus.rolls[i], corpus.scenes[i]});
  }

  TrainCallbacks<float> cb;
  cb.on_epoch = [&](const TrainState<float>& s, const EpochRecord& rec) {
    std::string text;
    for (const auto& r : s.history) text += history_line(r) + "\n";
    if (rec.best) save_ckpt(dir / "best.ckpt", s, norm, meta, false);
    save_ckpt(dir / "last.ckpt", s, norm, meta, true);
    binio::write_text(dir / "history.jsonl", text);
  };
  spdlog::info("{}: training {} epochs on {} clips (dev {})", name, tc.epochs, train_set.size(),
               dev_set.size());
  train(st, train_set, dev_set, tc, cb);
  if (!fs::exists(dir / "best.ckpt")) save_ckpt(dir / "best.ckpt", st, norm, meta, false);
  if (!fs::exists(dir / "history.jsonl")) binio::write_text(dir / "history.jsonl", "");
  binio::write_text(dir / "done", digest + "\n");
  summary["status"] = resumed ? "resumed" : "trained";
  summary["epochs"] = st.epochs_done;
  summary["best_epoch"] = st.best_epoch;
  summary["selection"] = selection_name(selection_metric(spec.kind, spec.beta));
  summary["best_score"] = st.best_score ? json(*st.best_score) : json(nullptr);
  return summary;
}

}  // namespace

json cmd_train(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const Corpus corpus = load_corpus(cfg, opts.out);
  const Standardizer norm = fit_norm(corpus);
  std::vector<Tensorf> normed;
  normed.reserve(corpus.features.size());
  for (const auto& f : corpus.features) normed.push_back(norm.apply(f));

  std::vector<RunSpec> specs;
  const auto seeds = cfg.get_ints("train.seeds");
  const auto betas = cfg.get_reals("train.betas");
  require(!seeds.empty(), ErrorCode::kConfig, "train.seeds is empty");
  for (const auto& method : cfg.get_strings("train.methods")) {
    const ModelKind kind = parse_model_kind(method);
    for (auto seed : seeds) {
      require(seed >= 0, ErrorCode::kConfig, "seeds must not be negative");
      if (kind == ModelKind::kProposed) {
        require(!betas.empty(), ErrorCode::kConfig, "train.betas is empty");
        for (double b : betas) specs.push_back({kind, b, static_cast<std::uint64_t>(seed)});
      } else {
        specs.push_back({kind, 0.0, static_cast<std::uint64_t>(seed)});
      }
    }
  }
  const fs::path runs = opts.out / "runs";
  echo_config(cfg, runs);

  std::vector<json> results(specs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        results[i] = execute_run(specs[i], cfg, corpus, norm, normed, runs);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next = specs.size();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, specs.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return {{"command", "train"}, {"runs", results}};
}

json cmd_tune_thresholds(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const Corpus corpus = load_corpus(cfg, opts.out);
  const auto dev = corpus.indices(Split::kDev);
  json runs = json::array();
  for (const auto& d : run_dirs_of(opts)) {
    const fs::path dir(d);
    const fs::path ckpt = dir / "best.ckpt";
    require(fs::exists(ckpt), ErrorCode::kNotFound, "missing checkpoint " + ckpt.string());
    const std::string digest = hex(
        Fnv1a().update(hex(file_digest(ckpt))).update("|").update(hex(corpus.digest)).value());
    const fs::path out_path = dir / "thresholds.json";
    if (fs::exists(out_path)) {
      const json prev = json::parse(binio::read_text(out_path));
      if (prev.value("digest", "") == digest) {
        runs.push_back({{"run", dir.filename().string()}, {"status", "cached"}});
        continue;
      }
    }
    const LoadedModel lm = load_model(ckpt);
    require(lm.events == corpus.manifest.vocab.events && lm.scenes == corpus.manifest.vocab.scenes,
            ErrorCode::kConfig, dir.string() + ": model vocabulary differs from the data");
    json j = {{"digest", digest}, {"events", lm.events}};
    if (lm.net.has_event_head()) {
      require(!dev.empty(), ErrorCode::kInvalidArgument, "the dev split is empty");
      std::vector<Tensorf> feats;
      std::vector<const Tensorf*> ptrs;
      std::vector<EventRoll> targets;
      for (std::size_t i : dev) feats.push_back(lm.norm.apply(corpus.features[i]));
      for (const auto& f : feats) ptrs.push_back(&f);
      for (std::size_t i : dev) targets.push_back(corpus.rolls[i]);
      const auto scores = predict(lm.net, ptrs);
      std::vector<Tensorf> ev;
      for (const auto& s : scores) ev.push_back(s.event_probs);
      const Thresholds th = tune_thresholds(ev, targets);
      j["theta"] = th.theta;
    } else {
      j["theta"] = json::array();
    }
    echo_config(cfg, dir);
    binio::write_text(out_path, j.dump(2) + "\n");
    runs.push_back({{"run", dir.filename().string()}, {"status", "tuned"}});
  }
  return {{"command", "tune-thresholds"}, {"runs", runs}};
}

json cmd_evaluate(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const Corpus corpus = load_corpus(cfg, opts.out);
  const auto eval = corpus.indices(Split::kEval);
  require(!eval.empty(), ErrorCode::kInvalidArgument, "the eval split is empty");
  const auto segment = cfg.get_int("eval.segment_frames");
  require(segment > 0, ErrorCode::kConfig, "eval.segment_frames must be positive");
  json runs = json::array();
  for (const auto& d : run_dirs_of(opts)) {
    const fs::path dir(d);
    const fs::path ckpt = dir / "best.ckpt";
    require(fs::exists(ckpt), ErrorCode::kNotFound, "missing checkpoint " + ckpt.string());
    const fs::path th_path = dir / "thresholds.json";
    require(fs::exists(th_path), ErrorCode::kNotFound,
            "missing " + th_path.string() + " (run tune-thresholds first)");
    const std::string th_text = binio::read_text(th_path);
    const std::string digest = hex(Fnv1a()
                                       .update(hex(file_digest(ckpt)))
                                       .update("|")
                                       .update(th_text)
                                       .update("|")
                                       .update(hex(corpus.digest))
                                       .update("|")
                                       .update(std::to_string(segment))
                                       .value());
    const fs::path edir = dir / "eval";
    if (read_marker(edir / "digest") == digest && fs::exists(edir / "report.json")) {
      runs.push_back({{"run", dir.filename().string()}, {"status", "cached"}});
      continue;
    }
    const LoadedModel lm = load_model(ckpt);
    require(lm.events == corpus.manifest.vocab.events && lm.scenes == corpus.manifest.vocab.scenes,
            ErrorCode::kConfig, dir.string() + ": model vocabulary differs from the data");
    const json th = json::parse(th_text);
    Thresholds thresholds{th.at("theta").get<std::vector<double>>()};
    if (lm.net.has_event_head()) {
      require(thresholds.theta.size() == lm.events.size(), ErrorCode::kFormat,
              th_path.string() + ": wrong number of thresholds");
    }
    std::vector<Tensorf> feats;
    std::vector<const Tensorf*> ptrs;
    for (std::size_t i : eval) feats.push_back(lm.norm.apply(corpus.features[i]));
    for (const auto& f : feats) ptrs.push_back(&f);
    const auto scores = predict(lm.net, ptrs);

    std::vector<ClipOutcome> outcomes;
    std::vector<NamedRoll> pred_rolls, ref_rolls;
    std::string scene_lines = "# clip\ttrue\tpredicted\n";
    for (std::size_t k = 0; k < eval.size(); ++k) {
      const std::size_t i = eval[k];
      ClipOutcome o;
      o.clip_id = corpus.manifest.clips[i].id;
      o.true_scene = corpus.scenes[i];
      if (lm.net.has_event_head()) {
        o.pred_roll = binarize(scores[k].event_probs, thresholds);
        o.target_roll = corpus.rolls[i];
        pred_rolls.emplace_back(o.clip_id, *o.pred_roll);
        ref_rolls.emplace_back(o.clip_id, *o.target_roll);
      }
      if (lm.net.has_scene_head()) {
        o.pred_scene = argmax(scores[k].scene_probs);
        scene_lines += o.clip_id + '\t' + lm.scenes[o.true_scene] + '\t' +
                       lm.scenes[*o.pred_scene] + '\n';
      }
      outcomes.push_back(std::move(o));
    }
    const EvalReport rep = build_report(outcomes, lm.events, lm.scenes,
                                        static_cast<std::size_t>(segment));
    fs::create_directories(edir);
    echo_config(cfg, edir);
    json rj = json::parse(rep.to_json());
    rj["run"] = lm.meta;
    rj["thresholds"] = thresholds.theta;
    binio::write_text(edir / "report.json", rj.dump(2) + "\n");
    binio::write_text(edir / "report.txt", rep.to_text());
    if (!pred_rolls.empty()) {
      write_roll_file(edir / "pred_rolls.tsv", pred_rolls);
      write_roll_file(edir / "ref_rolls.tsv", ref_rolls);
    }
    if (lm.net.has_scene_head()) binio::write_text(edir / "scenes.tsv", scene_lines);
    binio::write_text(edir / "digest", digest + "\n");
    json r = {{"run", dir.filename().string()}, {"status", "evaluated"}};
    if (rep.has_events) {
      r["event_f"] = rep.event_prf.f;
      r["event_er"] = rep.event_er.er ? json(*rep.event_er.er) : json(nullptr);
    }
    if (rep.has_scenes) r["scene_f"] = rep.scene.prf.f;
    runs.push_back(r);
  }
  return {{"command", "evaluate"}, {"runs", runs}};
}

json cmd_count_params(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const ModelConfig mc = cfg.model_config();
  json rows = json::array();
  std::string text = fmt::format("{:<12}{:>12}{:>12}{:>12}{:>12}\n", "model", "shared", "event",
                                 "scene", "total");
  for (ModelKind k : {ModelKind::kCnnEvent, ModelKind::kCrnnEvent, ModelKind::kCnnScene,
                      ModelKind::kProposed}) {
    const auto net = Network<float>::build(k, mc, 0);
    const std::size_t s = net.count_params(static_cast<unsigned>(Group::kShared));
    const std::size_t e = net.count_params(static_cast<unsigned>(Group::kEvent));
    const std::size_t c = net.count_params(static_cast<unsigned>(Group::kScene));
    const std::size_t total = net.count_params();
    rows.push_back({{"model", model_kind_name(k)}, {"shared", s}, {"event", e}, {"scene", c},
                    {"total", total}});
    auto group = [](std::size_t n) {
      std::string digits = std::to_string(n), out;
      for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
      }
      return out;
    };
    text += fmt::format("{:<12}{:>12}{:>12}{:>12}{:>12}\n", model_kind_name(k), group(s),
                        group(e), group(c), group(total));
  }
  json summary = {{"command", "count-params"}, {"model", model_config_json(mc)}, {"counts", rows},
                  {"text", text}};
  if (opts.out != fs::path(".")) {
    echo_config(cfg, opts.out);
    binio::write_text(opts.out / "params.json", summary.dump(2) + "\n");
  }
  return summary;
}

namespace {

struct Agg {
  std::vector<double> event_f, event_er, scene_f;
};

json stats(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return {{"mean", mean}, {"std", sd}, {"n", v.size()}};
}

std::string cell(const json& s, double scale) {
  if (s.is_null()) return "-";
  return fmt::format("{:.2f} ± {:.2f}", scale * s.at("mean").get<double>(),
                     scale * s.at("std").get<double>());
}

}  // namespace

json cmd_report(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  std::map<std::pair<std::string, double>, Agg> groups;
  std::optional<std::pair<json, json>> vocab;
  std::size_t used = 0;
  for (const auto& d : run_dirs_of(opts)) {
    const fs::path rp = fs::path(d) / "eval" / "report.json";
    if (!fs::exists(rp)) continue;
    const json r = json::parse(binio::read_text(rp));
    const auto v = std::make_pair(r.at("events"), r.at("scenes"));
    if (!vocab) vocab = v;
    require(*vocab == v, ErrorCode::kConfig,
            "inconsistent vocabularies across runs (" + rp.string() + ")");
    const json& meta = r.at("run");
    const std::string method = meta.at("kind");
    const double beta = meta.at("beta").is_null() ? std::nan("") : meta.at("beta").get<double>();
    Agg& a = groups[{method, beta}];
    if (r.contains("event")) {
      a.event_f.push_back(r["event"]["prf"]["f"].get<double>());
      if (!r["event"]["error_rate"]["er"].is_null()) {
        a.event_er.push_back(r["event"]["error_rate"]["er"].get<double>());
      }
    }
    if (r.contains("scene")) a.scene_f.push_back(r["scene"]["prf"]["f"].get<double>());
    ++used;
  }
  require(used > 0, ErrorCode::kNotFound, "no evaluated runs found (run evaluate first)");

  json rows = json::array();
  std::string text = fmt::format("{:<12}{:>10}{:>6}{:>18}{:>18}{:>18}\n", "method", "beta", "n",
                                 "event F (%)", "event ER", "scene F (%)");
  std::string sweep = "# beta\tevent_f_mean\tevent_f_std\tscene_f_mean\tscene_f_std\tn\n";
  for (const auto& [key, a] : groups) {
    const auto& [method, beta] = key;
    const bool has_beta = !std::isnan(beta);
    const json ef = stats(a.event_f), er = stats(a.event_er), sf = stats(a.scene_f);
    const std::size_t n = std::max({a.event_f.size(), a.scene_f.size()});
    rows.push_back({{"method", method},
                    {"beta", has_beta ? json(beta) : json(nullptr)},
                    {"n", n},
                    {"event_f", ef},
                    {"event_er", er},
                    {"scene_f", sf}});
    text += fmt::format("{:<12}{:>10}{:>6}{:>18}{:>18}{:>18}\n", method,
                        has_beta ? format_real(beta) : "-", n, cell(ef, 100), cell(er, 1),
                        cell(sf, 100));
    if (method == "proposed" && has_beta) {
      auto mean = [](const json& s) { return s.is_null() ? std::string("nan") : format_real(s["mean"].get<double>()); };
      auto sd = [](const json& s) { return s.is_null() ? std::string("nan") : format_real(s["std"].get<double>()); };
      sweep += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", format_real(beta), mean(ef), sd(ef),
                           mean(sf), sd(sf), n);
    }
  }
  const fs::path dir = opts.out / "report";
  echo_config(cfg, dir);
  json summary = {{"command", "report"}, {"runs", used}, {"rows", rows}, {"text", text}};
  binio::write_text(dir / "results.json", summary.dump(2) + "\n");
  binio::write_text(dir / "results.txt", text);
  binio::write_text(dir / "beta_sweep.tsv", sweep);
  return summary;
}

}  // namespace jsed
