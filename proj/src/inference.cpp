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

#include "bgm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bgm/errors.hpp"
#include "bgm/numeric.hpp"
#include "bgm/oracles.hpp"

namespace bgm {

LogPartition LogZEstimate::as_partition() const {
  return {log_z, std_error, n, LogZSource::kImportanceSampling};
}

LogZEstimate estimate_log_partition(const LogDensity& target, const GenerativeModel& proposal, std::size_t n,
                                    std::uint64_t seed, std::string proposal_id) {
  if (n < 1) throw InvalidInput("importance sample size must be >= 1");
  if (target.dim() != proposal.dim()) throw InvalidInput("proposal dimension does not match target");
  // Draws are made in fixed-size shards, each with its own stream, so memory stays bounded.
  constexpr std::size_t kShard = 65536;
  std::vector<double> log_w;
  log_w.reserve(n);
  for (std::size_t start = 0, shard = 0; start < n; start += kShard, ++shard) {
    const std::size_t count = std::min(kShard, n - start);
    const DataMatrix draws = proposal.sample(count, derive_seed(seed, shard));
    const auto log_target = target.log_density_batch(draws);
    const auto log_proposal = proposal.log_density_batch(draws);
    for (std::size_t i = 0; i < count; ++i) log_w.push_back(log_target[i] - log_proposal[i]);
  }
  double max_w = kNegInf;
  for (double v : log_w) max_w = std::max(max_w, v);
  if (!(max_w > kNegInf) || !std::isfinite(max_w)) {
    throw EstimationFailure("importance weights are all zero or non-finite");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : log_w) {
    const double w = std::exp(v - max_w);
    sum += w;
    sum_sq += w * w;
  }
  const auto nd = static_cast<double>(n);
  LogZEstimate est;
  est.n = n;
  est.proposal_id = std::move(proposal_id);
  est.log_z = max_w + std::log(sum / nd);
  est.ess = sum * sum / sum_sq;
  if (n > 1) {
    // Delta method: se(log mean w) = sd(w) / (sqrt(n) mean(w)).
    const double mean = sum / nd;
    const double var = std::max(0.0, (sum_sq - nd * mean * mean) / (nd - 1.0));
    est.std_error = std::sqrt(var / nd) / mean;
  }
  return est;
}

void MhConfig::validate() const {
  if (thin < 1) throw InvalidInput("thin must be >= 1");
  if (n_chains < 1) throw InvalidInput("n_chains must be >= 1");
  if (proposal == MhProposal::kGaussianRandomWalk && !(step > 0.0)) throw InvalidInput("step must be positive");
}

Json MhDiagnostics::to_json() const {
  return {{"acceptance_rate", acceptance_rate},
          {"total_steps", total_steps},
          {"n_chains", n_chains},
          {"thin", thin},
          {"acceptance_warning", acceptance_warning}};
}

double mh_acceptance_probability(double log_current, double log_proposed) {
  if (log_proposed == kNegInf) return 0.0;
  if (log_proposed >= log_current) return 1.0;
  return std::exp(log_proposed - log_current);
}

namespace {

template <class InitFn>
MhResult run_chains(const LogDensity& target, const MhConfig& cfg, std::size_t n_samples, InitFn&& make_init) {
  cfg.validate();
  if (n_samples < 1) throw InvalidInput("sample count must be >= 1");
  const auto d = static_cast<Eigen::Index>(target.dim());
  const std::size_t n_chains = std::min(cfg.n_chains, n_samples);
  const std::size_t per_chain = (n_samples + n_chains - 1) / n_chains;
  const auto nc = static_cast<Eigen::Index>(n_chains);
  const bool discrete = cfg.proposal == MhProposal::kUniformDiscrete;
  auto wrap = [&](RowMatrix m) { return discrete ? DataMatrix::binary(std::move(m)) : DataMatrix::real(std::move(m)); };

  // All chains advance in lockstep so each step is one batched density evaluation;
  // every chain still owns its random stream.
  std::vector<Rng> rngs;
  rngs.reserve(n_chains);
  RowMatrix state(nc, d);
  for (std::size_t c = 0; c < n_chains; ++c) {
    rngs.emplace_back(derive_seed(cfg.seed, c));
    const std::vector<double> init = make_init(c, rngs.back());
    if (init.size() != static_cast<std::size_t>(d)) throw InvalidInput("initial state dimension does not match target");
    for (Eigen::Index j = 0; j < d; ++j) state(static_cast<Eigen::Index>(c), j) = init[static_cast<std::size_t>(j)];
  }
  std::vector<double> current = target.log_density_batch(wrap(state));
  for (double v : current) {
    if (!std::isfinite(v)) throw SamplerError("target log density at the initial state is not finite");
  }

  std::bernoulli_distribution bit(0.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RowMatrix proposal(nc, d);
  std::size_t steps = 0;
  std::size_t accepted = 0;
  auto step = [&]() {
    for (Eigen::Index c = 0; c < nc; ++c) {
      Rng& rng = rngs[static_cast<std::size_t>(c)];
      for (Eigen::Index j = 0; j < d; ++j) {
        proposal(c, j) = discrete ? (bit(rng) ? 1.0 : 0.0) : state(c, j) + cfg.step * normal(rng);
      }
    }
    const std::vector<double> proposed = target.log_density_batch(wrap(proposal));
    for (Eigen::Index c = 0; c < nc; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const double a = mh_acceptance_probability(current[ci], proposed[ci]);
      if (a >= 1.0 || (a > 0.0 && unit(rngs[ci]) < a)) {
        state.row(c) = proposal.row(c);
        current[ci] = proposed[ci];
        ++accepted;
      }
    }
    steps += n_chains;
  };

  for (std::size_t b = 0; b < cfg.burn_in; ++b) step();
  RowMatrix draws(static_cast<Eigen::Index>(n_chains * per_chain), d);
  for (std::size_t s = 0; s < per_chain; ++s) {
    for (std::size_t t = 0; t < cfg.thin; ++t) step();
    for (std::size_t c = 0; c < n_chains; ++c) draws.row(static_cast<Eigen::Index>(c * per_chain + s)) = state.row(static_cast<Eigen::Index>(c));
  }

  MhDiagnostics diag;
  diag.total_steps = steps;
  diag.n_chains = n_chains;
  diag.thin = cfg.thin;
  diag.acceptance_rate = steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  diag.acceptance_warning = diag.acceptance_rate < 0.001 || diag.acceptance_rate > 0.999;
  return {wrap(draws.topRows(static_cast<Eigen::Index>(n_samples))), diag};
}

}  // namespace

MhResult mh_sample(const LogDensity& target, const MhConfig& cfg, std::size_t n_samples, Point init) {
  require_dim(target, init);
  return run_chains(target, cfg, n_samples,
                    [&](std::size_t, Rng&) { return std::vector<double>(init.begin(), init.end()); });
}

MhResult mh_sample(const LogDensity& target, const MhConfig& cfg, std::size_t n_samples,
                   const GenerativeModel& init_sampler) {
  if (init_sampler.dim() != target.dim()) throw InvalidInput("init sampler dimension does not match target");
  return run_chains(target, cfg, n_samples, [&](std::size_t c, Rng&) {
    const DataMatrix draw = init_sampler.sample(1, derive_seed(cfg.seed ^ 0xA5A5A5A5ULL, c));
    return std::vector<double>(draw.row(0).begin(), draw.row(0).end());
  });
}

MhResult mh_sample(const LogDensity& target, const MhConfig& cfg, std::size_t n_samples) {
  if (cfg.proposal != MhProposal::kUniformDiscrete) {
    throw InvalidInput("a random-walk chain needs an initial state or an init sampler");
  }
  return run_chains(target, cfg, n_samples, [&](std::size_t, Rng& rng) {
    std::bernoulli_distribution bit(0.5);
    // Retry until the chain starts inside the support.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::vector<double> x(target.dim());
      for (double& v : x) v = bit(rng) ? 1.0 : 0.0;
      if (std::isfinite(target.log_density(x))) return x;
    }
    throw SamplerError("could not find a uniform initial state with finite density");
  });
}

Eigen::MatrixXd uniform_discrete_transition_matrix(const LogDensity& target) {
  const int d = static_cast<int>(target.dim());
  if (d > 12) throw InvalidInput("transition matrix limited to d <= 12");
  const auto n = static_cast<Eigen::Index>(std::size_t{1} << d);
  const auto logs = target.log_density_batch(all_states(d));
  const double q = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double stay = q;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double a = mh_acceptance_probability(logs[i], logs[j]);
      k(i, j) = q * a;
      stay += q * (1.0 - a);
    }
    k(i, i) = stay;
  }
  return k;
}

ConditionalPrediction conditional_predict(const LogDensity& model, Point x, std::size_t j) {
  require_dim(model, x);
  if (j >= x.size()) throw InvalidInput("prediction index out of range");
  if (x[j] != 0.0 && x[j] != 1.0) throw InvalidInput("predicted coordinate must be binary");
  std::vector<double> probe(x.begin(), x.end());
  probe[j] = 1.0;
  const double log_one = model.log_density(probe);
  probe[j] = 0.0;
  const double log_zero = model.log_density(probe);
  if (log_one == kNegInf && log_zero == kNegInf) return {0.5, true};
  return {logistic(log_one - log_zero), false};
}

OneOutAccuracy eval_one_out_accuracy(const LogDensity& model, const DataMatrix& test, double threshold) {
  if (test.cols() != model.dim()) throw InvalidInput("test dimension does not match model");
  if (!test.all_binary()) throw InvalidInput("one-out classification needs binary data");
  const auto d = static_cast<Eigen::Index>(test.cols());
  OneOutAccuracy result;
  std::size_t correct = 0;
  RowMatrix probes(d + 1, d);
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto row = test.values().row(static_cast<Eigen::Index>(i));
    for (Eigen::Index r = 0; r <= d; ++r) probes.row(r) = row;
    for (Eigen::Index j = 0; j < d; ++j) probes(j + 1, j) = 1.0 - row(j);
    const auto logs = model.log_density_batch(DataMatrix::binary(probes));
    for (Eigen::Index j = 0; j < d; ++j) {
      const bool is_one = row(j) == 1.0;
      const double log_one = is_one ? logs[0] : logs[j + 1];
      const double log_zero = is_one ? logs[j + 1] : logs[0];
      double prob = 0.5;
      if (log_one == kNegInf && log_zero == kNegInf) {
        ++result.n_degenerate;
      } else {
        prob = logistic(log_one - log_zero);
      }
      const bool predict_one = prob >= threshold;
      if (predict_one == is_one) ++correct;
      ++result.n_predictions;
    }
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(result.n_predictions);
  return result;
}

}  // namespace bgm
