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

#ifndef BGM_INFERENCE_HPP
#define BGM_INFERENCE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bgm/core.hpp"

namespace bgm {

struct LogZEstimate {
  double log_z = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
  std::size_t n = 0;
  std::string proposal_id;

  LogPartition as_partition() const;
};

/// Importance-sampling estimate of log sum_x q~(x) with draws from the proposal.
/// The proposal must cover q~'s support; this is not checked.
LogZEstimate estimate_log_partition(const LogDensity& target, const GenerativeModel& proposal, std::size_t n,
                                    std::uint64_t seed, std::string proposal_id = "proposal");

enum class MhProposal { kUniformDiscrete, kGaussianRandomWalk };

struct MhConfig {
  MhProposal proposal = MhProposal::kUniformDiscrete;
  /// Random-walk standard deviation (gaussian_rw only).
  double step = 0.5;
  std::size_t burn_in = 100000;
  std::size_t thin = 1;
  std::size_t n_chains = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MhDiagnostics {
  double acceptance_rate = 0.0;
  std::size_t total_steps = 0;
  std::size_t n_chains = 0;
  std::size_t thin = 1;
  /// Acceptance outside [0.001, 0.999].
  bool acceptance_warning = false;

  Json to_json() const;
};

struct MhResult {
  DataMatrix samples;
  MhDiagnostics diagnostics;
};

/// Metropolis-Hastings acceptance probability min(1, q~(x') / q~(x)) for a symmetric proposal.
double mh_acceptance_probability(double log_current, double log_proposed);

/// n_samples post-burn-in, thinned draws split across independent chains (at most one chain per
/// draw), all started at init.
MhResult mh_sample(const LogDensity& target, const MhConfig& cfg, std::size_t n_samples, Point init);
/// Each chain starts from its own draw of init_sampler.
MhResult mh_sample(const LogDensity& target, const MhConfig& cfg, std::size_t n_samples,
                   const GenerativeModel& init_sampler);
/// uniform_discrete only: each chain starts from a uniform random state.
MhResult mh_sample(const LogDensity& target, const MhConfig& cfg, std::size_t n_samples);

/// Exact transition matrix of the uniform-discrete sampler over {0,1}^d (rows sum to one).
Eigen::MatrixXd uniform_discrete_transition_matrix(const LogDensity& target);

struct ConditionalPrediction {
  double prob_one = 0.5;
  bool degenerate = false;
};

/// p(x_j = 1 | x_rest) from the ratio of unnormalized joint densities.
ConditionalPrediction conditional_predict(const LogDensity& model, Point x, std::size_t j);

struct OneOutAccuracy {
  double accuracy = 0.0;
  std::size_t n_predictions = 0;
  std::size_t n_degenerate = 0;
};

/// Predicts every binary coordinate of every row from the rest; probability exactly 0.5 predicts 1.
OneOutAccuracy eval_one_out_accuracy(const LogDensity& model, const DataMatrix& test, double threshold = 0.5);

}  // namespace bgm

#endif
