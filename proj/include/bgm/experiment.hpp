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

#ifndef BGM_EXPERIMENT_HPP
#define BGM_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bgm/boosting.hpp"
#include "bgm/core.hpp"
#include "bgm/io.hpp"
#include "bgm/mixtures.hpp"
#include "bgm/oracles.hpp"

namespace bgm {

inline constexpr int kMetricsSchemaVersion = 1;

struct LogZConfig {
  /// auto, is, enumerate or quadrature. auto picks quadrature for 2-D real data,
  /// enumeration for binary data with d <= 20 and importance sampling otherwise.
  std::string method = "auto";
  std::size_t n = 1000000;
  /// Quadrature box; defaults to the synthetic target's support padded by 9.
  std::optional<Bounds2d> bounds;
  int resolution = 300;
};

struct SyntheticConfig {
  /// Component centers sit at (+-c, +-c).
  double c = 3.0;
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  int rounds = 2;
  int components = 2;
  double beta = 1.0;
  WeightHeuristic genbgm_heuristic = WeightHeuristic::kUniform;
  WeightHeuristic disc_heuristic = WeightHeuristic::kUnity;
  std::vector<std::string> methods = {"base", "add", "genbgm", "discbgm_nce", "discbgm_hd"};
  /// Density grids for the first seed; 0 disables them.
  int grid_resolution = 100;
};

struct SweepConfig {
  std::vector<WeightHeuristic> heuristics = {WeightHeuristic::kUnity, WeightHeuristic::kUniform,
                                             WeightHeuristic::kDecay};
  int max_rounds = 4;
  /// Horizons T to report; empty means 1..max_rounds.
  std::vector<int> horizons;
  FDivergence fdiv = FDivergence::nce();
};

struct ExperimentConfig {
  std::string task;
  /// The document as given (after seed overrides); hashed into every output.
  Json raw;

  DataFormat format = DataFormat::kCsv01;
  std::optional<std::filesystem::path> train, valid, test;
  std::optional<std::filesystem::path> model;

  /// base, additive, genbgm, discbgm or hybrid.
  std::string method = "hybrid";
  BaseSpec base;
  std::vector<RoundSpec> rounds;
  WeightHeuristic heuristic = WeightHeuristic::kUnity;
  std::optional<MhConfig> mh;
  double negative_ratio = 1.0;
  bool report_conditions = false;
  std::vector<std::uint64_t> seeds = {0};
  LogZConfig logz;
  std::size_t n_samples = 1000;
  SyntheticConfig synthetic;
  SweepConfig sweep;
  /// Trainer settings for discriminative rounds; the synthetic tasks default to a 1e-3 learning rate.
  TrainConfig train_defaults;
  std::filesystem::path output_dir = "out";

  /// Relative paths resolve against base_dir. Throws InvalidInput on a bad document.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = ".");
};

const std::vector<std::string>& experiment_tasks();

/// 16 hex digits of FNV-1a over the compact JSON dump.
std::string config_hash(const Json& j);

/// Mean and standard error over seeds of every numeric leaf in the successful per-seed records.
Json aggregate_per_seed(const Json& per_seed);

/// Equal-weight mixture of four unit-covariance Gaussians centered at (+-c, +-c).
GaussianMixture synthetic_mog_target(double c);

struct ExperimentOutcome {
  Json metrics;
  /// 0 success, 2 every seed failed.
  int exit_code = 0;
};

/// Runs cfg.task for each seed and writes metrics.json, timing.json and per-seed artifacts
/// under cfg.output_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

}  // namespace bgm

#endif
