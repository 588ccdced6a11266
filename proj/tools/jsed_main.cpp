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

// Batch command-line front end over the jsed C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "jsed/jsed.h"

namespace {

struct Flags {
  std::string config;
  std::string out = ".";
  long long seed = -1;
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
  std::vector<std::string> run_dirs;
  std::string log_level = "info";
  bool json = false;
};

int report_error(jsed_status st, const std::string& command, const std::string& message) {
  const nlohmann::json rec = {{"error",
                               {{"command", command},
                                {"status", jsed_status_name(st)},
                                {"code", static_cast<int>(st)},
                                {"message", message}}}};
  std::fprintf(stderr, "%s\n", rec.dump().c_str());
  return static_cast<int>(st);
}

int run(const std::string& command, const Flags& f) {
  jsed_status st = jsed_set_log_level(f.log_level.c_str());
  if (st != JSED_OK) return report_error(st, command, jsed_last_error());

  jsed_options* opts = nullptr;
  if ((st = jsed_options_create(&opts)) != JSED_OK) {
    return report_error(st, command, jsed_last_error());
  }
  auto check = [&](jsed_status s) {
    if (s != JSED_OK && st == JSED_OK) st = s;
  };
  if (!f.config.empty()) check(jsed_options_set_config(opts, f.config.c_str()));
  check(jsed_options_set_out(opts, f.out.c_str()));
  if (f.seed >= 0) check(jsed_options_set_seed(opts, static_cast<uint64_t>(f.seed)));
  check(jsed_options_set_jobs(opts, f.jobs));
  for (const auto& o : f.overrides) check(jsed_options_add_override(opts, o.c_str()));
  for (const auto& d : f.run_dirs) check(jsed_options_add_run_dir(opts, d.c_str()));

  char* summary = nullptr;
  if (st == JSED_OK) st = jsed_run_command(opts, command.c_str(), &summary);
  const std::string err = st == JSED_OK ? "" : jsed_last_error();
  jsed_options_destroy(opts);
  if (st != JSED_OK) return report_error(st, command, err);

  const nlohmann::json j = nlohmann::json::parse(summary);
  jsed_string_free(summary);
  if (!f.json && j.contains("text")) {
    std::fputs(j["text"].get<std::string>().c_str(), stdout);
  } else {
    std::printf("%s\n", j.dump(2).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint sound event detection and acoustic scene classification"};
  app.set_version_flag("--version", std::string(jsed_version()));
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "Run configuration (key = value lines)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", f.out, "Output directory holding all state")->capture_default_str();
  app.add_option("--seed", f.seed, "Override the seed and the training seed list")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", f.jobs, "Concurrent training runs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--set", f.overrides, "Override a configuration key (key=value)");
  app.add_option("--log-level", f.log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str();
  app.add_flag("--json", f.json, "Print the JSON summary even when a table is available");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth-data", "Generate the synthetic corpus under OUT/data"},
      {"extract-features", "Compute log-mel feature files for the manifest"},
      {"train", "Train every (method, beta, seed) run of the configured grid"},
      {"tune-thresholds", "Tune per-event thresholds on the dev split"},
      {"evaluate", "Score the eval split with tuned thresholds"},
      {"count-params", "Print parameter counts for the four model kinds"},
      {"report", "Aggregate evaluations across seeds"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "tune-thresholds" || name == "evaluate" || name == "report") {
      sub->add_option("runs", f.run_dirs, "Run directories (default: finished runs under OUT/runs)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error(JSED_ERR_INVALID_ARGUMENT, "", e.what());
  }
  return run(app.get_subcommands().front()->get_name(), f);
}
