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

#include <algorithm>
#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "bgm/errors.hpp"
#include "bgm/mixtures.hpp"
#include "em_common.hpp"

namespace bgm {

namespace {

constexpr double kDegenerateMass = 1e-10;

Eigen::MatrixXd clip_theta(Eigen::MatrixXd theta, double eps) { return theta.cwiseMax(eps).cwiseMin(1.0 - eps); }

struct MobFit {
  BernoulliMixture model;
  std::vector<double> trace;
};

/// log p(x_i | k) for all rows and components.
Eigen::MatrixXd component_log_likelihoods(const BernoulliMixture& model, const RowMatrix& x) {
  const Eigen::ArrayXXd theta = model.theta().array();
  const Eigen::MatrixXd logit = (theta.log() - (1.0 - theta).log()).matrix();
  const Eigen::VectorXd off = (1.0 - theta).log().rowwise().sum().matrix();
  Eigen::MatrixXd out = x * logit.transpose();
  out.rowwise() += off.transpose();
  return out;
}

double mob_e_step(const BernoulliMixture& model, const RowMatrix& x, std::span<const double> w,
                  Eigen::MatrixXd& resp) {
  const Eigen::MatrixXd comp = component_log_likelihoods(model, x);
  const auto k_count = comp.cols();
  resp.setZero(x.rows(), k_count);
  std::vector<double> terms(static_cast<std::size_t>(k_count));
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (w[i] <= 0.0) continue;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      terms[k] = std::log(model.weights()[k]) + comp(i, k);
    }
    const double lse = log_sum_exp(terms);
    for (Eigen::Index k = 0; k < k_count; ++k) resp(i, k) = std::exp(terms[k] - lse);
    ll += w[i] * lse;
  }
  return ll;
}

MobFit fit_once(const DataMatrix& data, std::span<const double> w, const EmConfig& cfg, Rng& rng) {
  const RowMatrix& x = data.values();
  const auto d = x.cols();
  const int k_count = cfg.components;
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::RowVectorXd mean = wv.transpose() * x;

  const auto seeds = detail::kmeanspp_seeds(x, w, k_count, rng);
  std::vector<double> pi(k_count, 1.0 / k_count);
  Eigen::MatrixXd theta(k_count, d);
  for (int k = 0; k < k_count; ++k) {
    theta.row(k) = 0.5 * (x.row(static_cast<Eigen::Index>(seeds[k])) + mean);
  }
  theta = clip_theta(std::move(theta), cfg.eps_theta);

  BernoulliMixture model(pi, theta);
  Eigen::MatrixXd resp;
  std::vector<double> trace;
  double ll = mob_e_step(model, x, w, resp);
  trace.push_back(ll);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // Weighted responsibilities; zero-weight rows are already zero.
    const Eigen::MatrixXd wr = resp.array().colwise() * wv.array();
    const Eigen::VectorXd mass = wr.colwise().sum().transpose();
    Eigen::MatrixXd sums = wr.transpose() * x;
    for (int k = 0; k < k_count; ++k) {
      if (mass(k) < kDegenerateMass) {
        const auto s = detail::draw_weighted(w, rng);
        spdlog::warn("bernoulli mixture component {} collapsed (mass {:.3g}); re-seeding at row {}", k, mass(k), s);
        pi[k] = 1.0 / k_count;
        theta.row(k) = 0.5 * (x.row(static_cast<Eigen::Index>(s)) + mean);
        continue;
      }
      pi[k] = mass(k);
      theta.row(k) = sums.row(k) / mass(k);
    }
    double pi_total = 0.0;
    for (double p : pi) pi_total += p;
    for (double& p : pi) p /= pi_total;
    theta = clip_theta(std::move(theta), cfg.eps_theta);

    model = BernoulliMixture(pi, theta);
    const double previous = ll;
    ll = mob_e_step(model, x, w, resp);
    trace.push_back(ll);
    if (detail::converged(previous, ll, cfg.rel_tol)) break;
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace

BernoulliMixture::BernoulliMixture(std::vector<double> weights, Eigen::MatrixXd theta)
    : weights_(std::move(weights)), theta_(std::move(theta)) {
  if (weights_.empty() || static_cast<Eigen::Index>(weights_.size()) != theta_.rows() || theta_.cols() < 1) {
    throw InvalidInput("bernoulli mixture needs one theta row per component and d >= 1");
  }
  double total = 0.0;
  for (double p : weights_) {
    if (!(p >= 0.0)) throw InvalidInput("mixing weights must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("mixing weights must sum to one");
  if (!((theta_.array() > 0.0).all() && (theta_.array() < 1.0).all())) {
    throw InvalidInput("bernoulli probabilities must lie strictly inside (0, 1)");
  }
  const Eigen::ArrayXXd t = theta_.array();
  logit_ = (t.log() - (1.0 - t).log()).matrix();
  log_off_sum_ = (1.0 - t).log().rowwise().sum().matrix();
}

double BernoulliMixture::log_density(Point x) const {
  require_dim(*this, x);
  const Eigen::Map<const Eigen::VectorXd> point(x.data(), static_cast<Eigen::Index>(x.size()));
  std::vector<double> terms(weights_.size());
  const Eigen::VectorXd comp = logit_ * point + log_off_sum_;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    terms[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + comp(static_cast<Eigen::Index>(k)) : kNegInf;
  }
  return log_sum_exp(terms);
}

std::vector<double> BernoulliMixture::log_density_batch(const DataMatrix& data) const {
  if (data.cols() != dim()) throw InvalidInput("data dimension does not match model");
  Eigen::MatrixXd comp = data.values() * logit_.transpose();
  comp.rowwise() += log_off_sum_.transpose();
  std::vector<double> out(data.rows());
  std::vector<double> terms(weights_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      terms[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))
                                   : kNegInf;
    }
    out[i] = log_sum_exp(terms);
  }
  return out;
}

DataMatrix BernoulliMixture::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw InvalidInput("sample count must be >= 1");
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RowMatrix out(static_cast<Eigen::Index>(n), theta_.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(pick(rng));
    for (Eigen::Index j = 0; j < theta_.cols(); ++j) {
      out(static_cast<Eigen::Index>(i), j) = unit(rng) < theta_(k, j) ? 1.0 : 0.0;
    }
  }
  return DataMatrix::binary(std::move(out));
}

Json BernoulliMixture::to_json() const {
  Json j;
  j["type"] = "bernoulli_mixture";
  j["weights"] = weights_;
  j["theta"] = Json::array();
  for (Eigen::Index k = 0; k < theta_.rows(); ++k) {
    std::vector<double> row(theta_.cols());
    for (Eigen::Index c = 0; c < theta_.cols(); ++c) row[c] = theta_(k, c);
    j["theta"].push_back(row);
  }
  return j;
}

BernoulliMixture BernoulliMixture::from_json(const Json& j) {
  if (j.at("type") != "bernoulli_mixture") throw InvalidInput("not a bernoulli_mixture document");
  auto weights = j.at("weights").get<std::vector<double>>();
  const auto rows = j.at("theta").get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw InvalidInput("theta must be nonempty");
  Eigen::MatrixXd theta(rows.size(), rows.front().size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != rows.front().size()) throw InvalidInput("theta rows must have equal length");
    for (std::size_t c = 0; c < rows[k].size(); ++c) theta(k, c) = rows[k][c];
  }
  return BernoulliMixture(std::move(weights), std::move(theta));
}

BernoulliMixture fit_mob_weighted(const DataMatrix& data, const PointWeights& weights, const EmConfig& cfg,
                                  EmTrace* trace) {
  cfg.validate();
  if (weights.size() != data.rows()) throw InvalidInput("weight count does not match row count");
  if (!data.all_binary()) throw InvalidInput("bernoulli mixture requires binary columns");
  if (data.rows() < static_cast<std::size_t>(cfg.components)) {
    throw InvalidInput("fewer data points than mixture components");
  }
  std::optional<MobFit> best;
  int best_restart = 0;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    MobFit fit = fit_once(data, weights.values(), cfg, rng);
    if (!best || fit.trace.back() > best->trace.back()) {
      best = std::move(fit);
      best_restart = r;
    }
  }
  if (trace) {
    trace->log_likelihood = best->trace;
    trace->restart = best_restart;
  }
  return std::move(best->model);
}

BernoulliMixture fit_mob(const DataMatrix& data, const EmConfig& cfg, EmTrace* trace) {
  return fit_mob_weighted(data, PointWeights::uniform(data.rows()), cfg, trace);
}

}  // namespace bgm
