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

#include "bgm/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "bgm/errors.hpp"
#include "bgm/numeric.hpp"

namespace bgm {

namespace {

// Sub-streams of a round's seed.
enum Stream : std::uint64_t { kLearner = 1, kNegatives = 2, kTrain = 3, kConditions = 5 };
constexpr std::uint64_t kSplitStream = 0x5EED5111ULL;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Unbiased variance; -inf entries make it +inf.
double variance(std::span<const double> v, double mu) {
  if (v.size() < 2) return 0.0;
  if (!std::isfinite(mu)) return kInf;
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size() - 1);
}

void require_pools(std::size_t n, const char* what) {
  if (n < 2) throw InvalidInput(std::string("condition check needs at least 2 ") + what + " samples");
}

std::shared_ptr<const LogDensity> default_generative_learner(ModelFamily family, const DataMatrix& data,
                                                             const PointWeights& weights, const RoundSpec& spec,
                                                             std::uint64_t seed) {
  EmConfig em = spec.em;
  em.seed = seed;
  if (family == ModelFamily::kGaussianMixture) {
    return std::make_shared<GaussianMixture>(fit_gmm_weighted(data, weights, em));
  }
  return std::make_shared<BernoulliMixture>(fit_mob_weighted(data, weights, em));
}

double weighted_log_likelihood(const LogDensity& h, const DataMatrix& data, const PointWeights& w) {
  const auto logs = h.log_density_batch(data);
  double s = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (w[i] > 0.0) s += w[i] * logs[i];
  }
  return s;
}

MhConfig mh_for(const DataMatrix& data, MhConfig mh) {
  mh.proposal = data.all_binary() ? MhProposal::kUniformDiscrete : MhProposal::kGaussianRandomWalk;
  return mh;
}

struct Runner {
  const DataMatrix& data;
  const BoostOptions& opts;
  int total_rounds;
  std::shared_ptr<const GenerativeModel> base;
  MhConfig mh;

  std::uint64_t round_seed(int t) const { return derive_seed(opts.seed, static_cast<std::uint64_t>(t)); }

  double alpha_for(const RoundSpec& spec, int t) const {
    return spec.alpha ? *spec.alpha : assign_alpha(opts.heuristic, t, total_rounds);
  }

  RoundRecord generative_round(MultiplicativeEnsemble& ens, const RoundSpec& spec, int t) const {
    const std::uint64_t seed = round_seed(t);
    const auto prev = ens.log_density_batch(data);
    const PointWeights w = genbgm_weights(prev, spec.beta);
    std::shared_ptr<const LogDensity> h =
        opts.generative_learner
            ? opts.generative_learner(data, w, spec, derive_seed(seed, kLearner))
            : default_generative_learner(opts.base.family, data, w, spec, derive_seed(seed, kLearner));
    if (h->dim() != data.cols()) throw InternalConsistencyError("learner returned a model of the wrong dimension");

    RoundRecord rec;
    rec.t = t;
    rec.kind = RoundKind::kGenerative;
    rec.alpha = alpha_for(spec, t);
    rec.beta = spec.beta;
    rec.objective = weighted_log_likelihood(*h, data, w);
    if (opts.report_conditions) {
      MhResult q = sample_ensemble(ens, *base, opts.condition_samples, mh, derive_seed(seed, kConditions));
      rec.mh = q.diagnostics;
      rec.conditions = check_conditions_multiplicative(h->log_density_batch(data), h->log_density_batch(q.samples));
    }
    ens.append({std::move(h), rec.alpha, MemberKind::kGenerator});
    return rec;
  }

  RoundRecord discriminative_round(MultiplicativeEnsemble& ens, const RoundSpec& spec, int t) const {
    const std::uint64_t seed = round_seed(t);
    const auto k = static_cast<std::size_t>(std::llround(opts.negative_ratio * static_cast<double>(data.rows())));
    if (k < 2) throw InvalidInput("negative_ratio leaves fewer than 2 negatives");
    MhResult neg = sample_ensemble(ens, *base, k, mh, derive_seed(seed, kNegatives));

    RoundRecord rec;
    rec.t = t;
    rec.kind = RoundKind::kDiscriminative;
    rec.alpha = alpha_for(spec, t);
    rec.fdiv = spec.fdiv.name();
    if (neg.diagnostics.total_steps > 0) rec.mh = neg.diagnostics;

    std::shared_ptr<const LogDensity> h;
    if (opts.discriminative_learner) {
      h = opts.discriminative_learner(data, neg.samples, spec, derive_seed(seed, kTrain));
    } else {
      TrainConfig train = spec.train;
      train.seed = derive_seed(seed, kTrain);
      TrainResult fit = train_fdiv_classifier(data, neg.samples, spec.fdiv, train);
      rec.objective = fit.best_validation_objective;
      spdlog::debug("round {}: {} bound {:.4f} at epoch {}", t, rec.fdiv, fit.best_validation_objective,
                    fit.best_epoch);
      h = std::make_shared<DensityRatioModel>(std::move(fit.classifier), spec.fdiv, fit.gamma);
    }
    if (h->dim() != data.cols()) throw InternalConsistencyError("learner returned a model of the wrong dimension");
    if (opts.report_conditions) {
      rec.conditions = check_conditions_multiplicative(h->log_density_batch(data), h->log_density_batch(neg.samples));
    }
    ens.append({std::move(h), rec.alpha, MemberKind::kDiscriminator});
    return rec;
  }
};

std::shared_ptr<const GenerativeModel> resolve_base(const DataMatrix& data, const BoostOptions& opts) {
  if (opts.base_model) {
    if (opts.base_model->dim() != data.cols()) throw InvalidInput("base model dimension does not match data");
    return opts.base_model;
  }
  return fit_base(data, opts.base, derive_seed(opts.seed, 0));
}

void require_kind(const std::vector<RoundSpec>& rounds, RoundKind kind) {
  for (const auto& r : rounds) {
    if (r.kind != kind) throw InvalidInput("round kind not allowed by this boosting variant");
  }
}

}  // namespace

std::string to_string(RoundKind kind) { return kind == RoundKind::kGenerative ? "generative" : "discriminative"; }

std::string to_string(WeightHeuristic h) {
  switch (h) {
    case WeightHeuristic::kUnity:
      return "unity";
    case WeightHeuristic::kUniform:
      return "uniform";
    case WeightHeuristic::kDecay:
      return "decay";
  }
  return "unknown";
}

WeightHeuristic heuristic_from_name(const std::string& name) {
  const std::string n = lower(name);
  if (n == "unity") return WeightHeuristic::kUnity;
  if (n == "uniform") return WeightHeuristic::kUniform;
  if (n == "decay") return WeightHeuristic::kDecay;
  throw InvalidInput("unknown weight heuristic '" + name + "'");
}

double assign_alpha(WeightHeuristic h, int t, int T) {
  if (t < 1 || t > T) throw InvalidInput("round index must satisfy 1 <= t <= T");
  switch (h) {
    case WeightHeuristic::kUnity:
      return 1.0;
    case WeightHeuristic::kUniform:
      return 1.0 / (T + 1);
    case WeightHeuristic::kDecay:
      return std::ldexp(1.0, -t);
  }
  throw InvalidInput("unknown weight heuristic");
}

double assign_alpha(const std::string& name, int t, int T) { return assign_alpha(heuristic_from_name(name), t, T); }

double base_alpha(WeightHeuristic h, int T) {
  if (T < 0) throw InvalidInput("T must be >= 0");
  return h == WeightHeuristic::kUniform ? 1.0 / (T + 1) : 1.0;
}

RoundSpec RoundSpec::generative(double beta, EmConfig em) {
  RoundSpec r;
  r.kind = RoundKind::kGenerative;
  r.beta = beta;
  r.em = em;
  return r;
}

RoundSpec RoundSpec::discriminative(FDivergence fdiv, TrainConfig train) {
  RoundSpec r;
  r.kind = RoundKind::kDiscriminative;
  r.fdiv = fdiv;
  r.train = std::move(train);
  return r;
}

void RoundSpec::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("beta must lie in [0, 1]");
  if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) throw InvalidInput("alpha must lie in [0, 1]");
  if (kind == RoundKind::kGenerative) {
    em.validate();
  } else {
    train.validate();
  }
}

Json RoundSpec::to_json() const {
  Json j{{"kind", to_string(kind)}};
  if (kind == RoundKind::kGenerative) {
    j["beta"] = beta;
    j["components"] = em.components;
  } else {
    j["fdiv"] = fdiv.name();
    j["epochs"] = train.epochs;
    j["learning_rate"] = train.learning_rate;
  }
  j["alpha"] = alpha ? Json(*alpha) : Json("heuristic");
  return j;
}

std::string to_string(ModelFamily family) { return family == ModelFamily::kGaussianMixture ? "gmm" : "mob"; }

ModelFamily family_from_name(const std::string& name) {
  const std::string n = lower(name);
  if (n == "gmm" || n == "gaussian_mixture") return ModelFamily::kGaussianMixture;
  if (n == "mob" || n == "bernoulli_mixture") return ModelFamily::kBernoulliMixture;
  throw InvalidInput("unknown model family '" + name + "'");
}

MhConfig BoostOptions::continuous_mh_preset() {
  MhConfig mh;
  mh.proposal = MhProposal::kGaussianRandomWalk;
  mh.step = 0.5;
  mh.burn_in = 1000;
  mh.thin = 1;
  mh.n_chains = 1000;
  return mh;
}

MhConfig BoostOptions::binary_mh_preset() {
  MhConfig mh;
  mh.proposal = MhProposal::kUniformDiscrete;
  mh.burn_in = 100000;
  mh.thin = 1;
  mh.n_chains = 1;
  return mh;
}

std::vector<double> BoostOptions::default_alpha_grid() {
  std::vector<double> grid(21);
  for (int i = 0; i <= 20; ++i) grid[i] = i / 20.0;
  return grid;
}

Json ConditionReport::to_json() const {
  return {{"sufficient_lhs", sufficient_lhs},
          {"sufficient_rhs", sufficient_rhs},
          {"necessary_lhs", necessary_lhs},
          {"necessary_rhs", necessary_rhs},
          {"sufficient_holds", sufficient_holds},
          {"necessary_holds", necessary_holds},
          {"sufficient_margin_stderr", sufficient_margin_stderr},
          {"necessary_margin_stderr", necessary_margin_stderr},
          {"n_p", n_p},
          {"n_q", n_q}};
}

ConditionReport check_conditions_multiplicative(std::span<const double> log_h_on_p,
                                                std::span<const double> log_h_on_q) {
  require_pools(log_h_on_p.size(), "P");
  require_pools(log_h_on_q.size(), "Q");
  ConditionReport r;
  r.n_p = log_h_on_p.size();
  r.n_q = log_h_on_q.size();
  const auto np = static_cast<double>(r.n_p);
  const auto nq = static_cast<double>(r.n_q);

  const double mean_p = mean(log_h_on_p);
  const double mean_q = mean(log_h_on_q);
  r.sufficient_lhs = mean_p;
  r.necessary_lhs = mean_p;
  r.sufficient_rhs = log_mean_exp(log_h_on_q);
  r.necessary_rhs = mean_q;
  r.sufficient_holds = r.sufficient_lhs >= r.sufficient_rhs;
  r.necessary_holds = r.necessary_lhs >= r.necessary_rhs;

  const double var_p = variance(log_h_on_p, mean_p);
  const double var_q = variance(log_h_on_q, mean_q);
  // Delta method for log mean exp: var(e^v) / (n mean(e^v)^2), computed on shifted values.
  double var_log_mean_exp = kInf;
  if (std::isfinite(r.sufficient_rhs)) {
    std::vector<double> w(log_h_on_q.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_h_on_q[i] - r.sufficient_rhs);
    var_log_mean_exp = variance(w, 1.0) / nq;
  }
  r.sufficient_margin_stderr = std::sqrt(var_p / np + var_log_mean_exp);
  r.necessary_margin_stderr = std::sqrt(var_p / np + var_q / nq);
  return r;
}

ConditionReport check_conditions_additive(std::span<const double> log_ratio_on_p) {
  require_pools(log_ratio_on_p.size(), "P");
  ConditionReport r;
  r.n_p = log_ratio_on_p.size();
  const auto np = static_cast<double>(r.n_p);
  std::vector<double> ratio(log_ratio_on_p.size());
  for (std::size_t i = 0; i < ratio.size(); ++i) ratio[i] = std::exp(log_ratio_on_p[i]);
  r.sufficient_lhs = mean(log_ratio_on_p);
  r.sufficient_rhs = 0.0;
  r.necessary_lhs = mean(ratio);
  r.necessary_rhs = 1.0;
  r.sufficient_holds = r.sufficient_lhs >= r.sufficient_rhs;
  r.necessary_holds = r.necessary_lhs >= r.necessary_rhs;
  r.sufficient_margin_stderr = std::sqrt(variance(log_ratio_on_p, r.sufficient_lhs) / np);
  r.necessary_margin_stderr = std::sqrt(variance(ratio, r.necessary_lhs) / np);
  return r;
}

PointWeights genbgm_weights(std::span<const double> prev_log_densities, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("beta must lie in [0, 1]");
  if (prev_log_densities.empty()) throw InvalidInput("no data points to weight");
  for (double v : prev_log_densities) {
    if (std::isnan(v)) throw InvalidInput("log densities must not be NaN");
  }
  if (beta == 0.0) return PointWeights::uniform(prev_log_densities.size());
  std::vector<double> log_w(prev_log_densities.size());
  bool any_finite_mass = false;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    log_w[i] = -beta * prev_log_densities[i];
    if (log_w[i] != kNegInf) any_finite_mass = true;
  }
  if (!any_finite_mass) throw InvalidInput("all reweighting weights are zero");
  return PointWeights::from_log(log_w);
}

Json RoundRecord::to_json() const {
  Json j{{"t", t}, {"kind", to_string(kind)}, {"alpha", alpha}, {"objective", objective}};
  if (kind == RoundKind::kGenerative) j["beta"] = beta;
  if (!fdiv.empty()) j["fdiv"] = fdiv;
  if (!line_search.empty()) j["line_search"] = line_search;
  if (mh) j["mh"] = mh->to_json();
  if (conditions) j["conditions"] = conditions->to_json();
  return j;
}

std::shared_ptr<const GenerativeModel> fit_base(const DataMatrix& data, const BaseSpec& spec, std::uint64_t seed) {
  EmConfig em = spec.em;
  em.seed = derive_seed(seed, kLearner);
  if (spec.family == ModelFamily::kGaussianMixture) return std::make_shared<GaussianMixture>(fit_gmm(data, em));
  return std::make_shared<BernoulliMixture>(fit_mob(data, em));
}

MhResult sample_ensemble(const MultiplicativeEnsemble& ens, const GenerativeModel& base, std::size_t n,
                         MhConfig mh, std::uint64_t seed) {
  if (ens.members().size() == 1 && ens.members().front().alpha == 1.0) {
    MhDiagnostics diag;
    diag.acceptance_rate = 1.0;
    diag.thin = 1;
    return {base.sample(n, seed), diag};
  }
  mh.seed = seed;
  MhResult r = mh_sample(ens, mh, n, base);
  if (r.diagnostics.acceptance_warning) {
    spdlog::warn("MH acceptance rate {:.4f} is outside [0.001, 0.999]", r.diagnostics.acceptance_rate);
  }
  return r;
}

BoostResult run_hybrid(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts) {
  for (const auto& r : rounds) r.validate();
  const int T = static_cast<int>(rounds.size());
  auto base = resolve_base(data, opts);
  const double a0 = opts.base_weight ? *opts.base_weight : base_alpha(opts.heuristic, T);
  if (!(a0 >= 0.0 && a0 <= 1.0)) throw InvalidInput("base weight must lie in [0, 1]");

  Runner runner{data, opts, T, base, mh_for(data, opts.mh)};
  BoostResult result{MultiplicativeEnsemble({base, a0, MemberKind::kGenerator}), {}};
  for (int t = 1; t <= T; ++t) {
    const RoundSpec& spec = rounds[static_cast<std::size_t>(t - 1)];
    result.rounds.push_back(spec.kind == RoundKind::kGenerative
                                ? runner.generative_round(result.ensemble, spec, t)
                                : runner.discriminative_round(result.ensemble, spec, t));
    spdlog::info("round {}/{} ({}) alpha={:.4f}", t, T, to_string(spec.kind), result.rounds.back().alpha);
  }
  return result;
}

BoostResult run_genbgm(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts) {
  require_kind(rounds, RoundKind::kGenerative);
  return run_hybrid(data, rounds, opts);
}

BoostResult run_discbgm(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts) {
  require_kind(rounds, RoundKind::kDiscriminative);
  return run_hybrid(data, rounds, opts);
}

AdditiveResult run_additive(const DataMatrix& data, const std::vector<RoundSpec>& rounds, const BoostOptions& opts) {
  require_kind(rounds, RoundKind::kGenerative);
  for (const auto& r : rounds) r.validate();
  if (opts.alpha_grid.empty()) throw InvalidInput("alpha grid is empty");
  for (double a : opts.alpha_grid) {
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("alpha grid values must lie in [0, 1]");
  }
  if (!(opts.validation_fraction > 0.0 && opts.validation_fraction < 1.0)) {
    throw InvalidInput("validation_fraction must lie in (0, 1)");
  }
  const std::size_t m = data.rows();
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(opts.validation_fraction * static_cast<double>(m))));
  if (n_val >= m) throw InvalidInput("too few rows for a validation split");

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(opts.seed, kSplitStream));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const DataMatrix train = data.select_rows(train_idx);
  const DataMatrix val = data.select_rows(val_idx);

  auto base = resolve_base(data, opts);
  AdditiveResult result{AdditiveEnsemble(std::shared_ptr<const LogDensity>(base)), {}};
  const int T = static_cast<int>(rounds.size());
  for (int t = 1; t <= T; ++t) {
    const RoundSpec& spec = rounds[static_cast<std::size_t>(t - 1)];
    const std::uint64_t seed = derive_seed(opts.seed, static_cast<std::uint64_t>(t));
    // Residual weights 1/q_{t-1}: the functional gradient of the log-likelihood.
    const auto prev_train = result.ensemble.log_density_batch(train);
    std::vector<double> log_w(prev_train.size());
    for (std::size_t i = 0; i < log_w.size(); ++i) log_w[i] = -prev_train[i];
    const PointWeights w = PointWeights::from_log(log_w);
    std::shared_ptr<const LogDensity> h =
        opts.generative_learner
            ? opts.generative_learner(train, w, spec, derive_seed(seed, kLearner))
            : default_generative_learner(opts.base.family, train, w, spec, derive_seed(seed, kLearner));

    const auto lq = result.ensemble.log_density_batch(val);
    const auto lh = h->log_density_batch(val);
    RoundRecord rec;
    rec.t = t;
    rec.kind = RoundKind::kGenerative;
    rec.objective = weighted_log_likelihood(*h, train, w);
    double best = kNegInf;
    double best_alpha = 0.0;
    for (double a : opts.alpha_grid) {
      double ll = 0.0;
      for (std::size_t i = 0; i < lq.size(); ++i) {
        if (a == 0.0) {
          ll += lq[i];
        } else if (a == 1.0) {
          ll += lh[i];
        } else {
          const double terms[2] = {std::log1p(-a) + lq[i], std::log(a) + lh[i]};
          ll += log_sum_exp(terms);
        }
      }
      ll /= static_cast<double>(lq.size());
      rec.line_search.push_back(ll);
      if (ll > best) {
        best = ll;
        best_alpha = a;
      }
    }
    rec.alpha = best_alpha;
    if (opts.report_conditions) {
      const auto lh_all = h->log_density_batch(data);
      const auto lq_all = result.ensemble.log_density_batch(data);
      std::vector<double> log_ratio(lh_all.size());
      for (std::size_t i = 0; i < log_ratio.size(); ++i) log_ratio[i] = lh_all[i] - lq_all[i];
      rec.conditions = check_conditions_additive(log_ratio);
    }
    result.ensemble.mix_in(std::move(h), best_alpha);
    spdlog::info("additive round {}/{} alpha_hat={:.2f}", t, T, best_alpha);
    result.rounds.push_back(std::move(rec));
  }
  return result;
}

}  // namespace bgm
