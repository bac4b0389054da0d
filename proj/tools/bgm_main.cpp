// Copyright 2026 The BGM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry point: bgm <task> --config <path> [--out <dir>] [--seeds s1,s2,...]

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bgm/errors.hpp"
#include "bgm/experiment.hpp"
#include "bgm/io.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boosted generative models: fit, evaluate and sample multiplicative and additive ensembles"};
  std::string task;
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  bool verbose = false;
  app.add_option("task", task, "Task to run")->required()->check(CLI::IsMember(bgm::experiment_tasks()));
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.add_option("--seeds", seeds, "Comma-separated seeds (override the config)")->delimiter(',');
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("bgm"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  bgm::ExperimentConfig cfg;
  try {
    bgm::Json raw = bgm::load_json(config_path);
    if (!raw.is_object()) throw bgm::InvalidInput("config must be a JSON object");
    if (raw.contains("task") && raw.at("task") != task) {
      spdlog::warn("config task '{}' overridden by command line task '{}'", raw.at("task").dump(), task);
    }
    raw["task"] = task;
    if (!seeds.empty()) raw["seeds"] = seeds;
    if (!out_dir.empty()) raw["output_dir"] = out_dir;
    cfg = bgm::ExperimentConfig::from_json(raw, std::filesystem::path(config_path).parent_path());
  } catch (const std::exception& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  }

  try {
    const bgm::ExperimentOutcome outcome = bgm::run_experiment(cfg);
    std::cout << outcome.metrics.at("aggregate").dump(2) << '\n';
    if (outcome.exit_code != 0) spdlog::error("every seed failed");
    return outcome.exit_code;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}
