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

#ifndef BGM_BOOSTING_HPP
#define BGM_BOOSTING_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bgm/core.hpp"
#include "bgm/fdiv.hpp"
#include "bgm/inference.hpp"
#include "bgm/mixtures.hpp"
#include "bgm/mlp.hpp"

namespace bgm {

enum class RoundKind { kGenerative, kDiscriminative };

std::string to_string(RoundKind kind);

enum class WeightHeuristic { kUnity, kUniform, kDecay };

std::string to_string(WeightHeuristic h);
/// "unity", "uniform" or "decay"; anything else is InvalidInput.
WeightHeuristic heuristic_from_name(const std::string& name);

/// Weight of round t (1 <= t <= T): unity 1, uniform 1/(T+1), decay 2^-t.
double assign_alpha(WeightHeuristic h, int t, int T);
double assign_alpha(const std::string& name, int t, int T);
/// Weight the schedule gives the base model (t = 0): 1 for unity and decay, 1/(T+1) for uniform.
double base_alpha(WeightHeuristic h, int T);

struct RoundSpec {
  RoundKind kind = RoundKind::kGenerative;
  /// Reweighting exponent, generative rounds only.
  double beta = 1.0;
  /// Discriminative rounds only.
  FDivergence fdiv = FDivergence::nce();
  EmConfig em;
  TrainConfig train;
  /// Fixed weight; the heuristic is used when empty.
  std::optional<double> alpha;

  static RoundSpec generative(double beta = 1.0, EmConfig em = {});
  static RoundSpec discriminative(FDivergence fdiv, TrainConfig train = {});

  void validate() const;
  Json to_json() const;
};

enum class ModelFamily { kGaussianMixture, kBernoulliMixture };

std::string to_string(ModelFamily family);
ModelFamily family_from_name(const std::string& name);

struct BaseSpec {
  ModelFamily family = ModelFamily::kGaussianMixture;
  EmConfig em;
};

/// Fits h_t given the data and reweighting. Lets callers swap EM for an oracle.
using GenerativeLearner = std::function<std::shared_ptr<const LogDensity>(
    const DataMatrix& data, const PointWeights& weights, const RoundSpec& spec, std::uint64_t seed)>;
/// Builds h_t from real (positive) and model (negative) samples.
using DiscriminativeLearner = std::function<std::shared_ptr<const LogDensity>(
    const DataMatrix& pos, const DataMatrix& neg, const RoundSpec& spec, std::uint64_t seed)>;

struct BoostOptions {
  BaseSpec base;
  WeightHeuristic heuristic = WeightHeuristic::kUnity;
  /// Every learner, sampler and split seed is derived from this one.
  std::uint64_t seed = 0;
  /// Skips fitting h_0.
  std::shared_ptr<const GenerativeModel> base_model;
  /// Overrides base_alpha(heuristic, T).
  std::optional<double> base_weight;
  /// Chain settings for negatives once the ensemble is no longer the plain base. The
  /// proposal kind is replaced to suit the data (uniform_discrete for binary data).
  MhConfig mh = continuous_mh_preset();
  /// Negatives per round as a multiple of the data size (k = ratio * m).
  double negative_ratio = 1.0;
  /// Holdout for the additive line search.
  double validation_fraction = 0.1;
  std::vector<double> alpha_grid = default_alpha_grid();
  bool report_conditions = false;
  /// Model samples drawn per round for condition reports on generative rounds.
  std::size_t condition_samples = 1000;
  GenerativeLearner generative_learner;
  DiscriminativeLearner discriminative_learner;

  /// One random-walk chain per draw (up to 1000 chains), 1000-step burn-in.
  static MhConfig continuous_mh_preset();
  /// Uniform independence proposal with a 100,000-step burn-in.
  static MhConfig binary_mh_preset();
  /// {0, 0.05, ..., 1}
  static std::vector<double> default_alpha_grid();
};

struct ConditionReport {
  double sufficient_lhs = 0.0;
  double sufficient_rhs = 0.0;
  double necessary_lhs = 0.0;
  double necessary_rhs = 0.0;
  bool sufficient_holds = false;
  bool necessary_holds = false;
  /// Standard errors of lhs - rhs.
  double sufficient_margin_stderr = 0.0;
  double necessary_margin_stderr = 0.0;
  std::size_t n_p = 0;
  std::size_t n_q = 0;

  double sufficient_margin() const { return sufficient_lhs - sufficient_rhs; }
  double necessary_margin() const { return necessary_lhs - necessary_rhs; }
  Json to_json() const;
};

/// Multiplicative rounds: sufficient E_P[log h] >= log E_Q[h], necessary E_P[log h] >= E_Q[log h].
ConditionReport check_conditions_multiplicative(std::span<const double> log_h_on_p,
                                                std::span<const double> log_h_on_q);
/// Additive rounds from log(h / q_{t-1}) at data points: sufficient E_P[log r] >= 0, necessary E_P[r] >= 1.
ConditionReport check_conditions_additive(std::span<const double> log_ratio_on_p);

/// w_i proportional to exp(-beta log q~_{t-1}(x_i)).
PointWeights genbgm_weights(std::span<const double> prev_log_densities, double beta);

struct RoundRecord {
  int t = 0;
  RoundKind kind = RoundKind::kGenerative;
  double alpha = 1.0;
  double beta = 0.0;
  std::string fdiv;
  /// Weighted log-likelihood (generative) or best validation bound (discriminative).
  double objective = 0.0;
  /// Additive rounds: validation log-likelihood per grid point.
  std::vector<double> line_search;
  std::optional<MhDiagnostics> mh;
  std::optional<ConditionReport> conditions;

  Json to_json() const;
};

struct BoostResult {
  MultiplicativeEnsemble ensemble;
  std::vector<RoundRecord> rounds;
};

struct AdditiveResult {
  AdditiveEnsemble ensemble;
  std::vector<RoundRecord> rounds;
};

/// Fits the base model described by spec on all rows.
std::shared_ptr<const GenerativeModel> fit_base(const DataMatrix& data, const BaseSpec& spec, std::uint64_t seed);

/// Generative rounds only.
BoostResult run_genbgm(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts);
/// Discriminative rounds only.
BoostResult run_discbgm(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts);
/// Any mix of round kinds on one evolving ensemble.
BoostResult run_hybrid(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts);
/// Mixture boosting with residual reweighting and a holdout line search for each mixing weight.
AdditiveResult run_additive(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts);

/// Draws n points from the normalized ensemble: ancestral when it is just the base at weight 1,
/// otherwise by Metropolis-Hastings started from base draws.
MhResult sample_ensemble(const MultiplicativeEnsemble& ens, const GenerativeModel& base, std::size_t n,
                         MhConfig mh, std::uint64_t seed);

}  // namespace bgm

#endif
