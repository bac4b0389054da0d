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
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "bgm/errors.hpp"
#include "bgm/mixtures.hpp"
#include "em_common.hpp"

namespace bgm {

void EmConfig::validate() const {
  if (components < 1) throw InvalidInput("EM needs at least one component");
  if (max_iters < 1) throw InvalidInput("max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw InvalidInput("rel_tol must be positive");
  if (n_restarts < 1) throw InvalidInput("n_restarts must be >= 1");
  if (!(cov_floor > 0.0)) throw InvalidInput("cov_floor must be positive");
  if (!(eps_theta > 0.0 && eps_theta < 0.5)) throw InvalidInput("eps_theta must lie in (0, 0.5)");
}

namespace detail {

std::size_t draw_weighted(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) {
    std::uniform_int_distribution<std::size_t> pick(0, weights.size() - 1);
    return pick(rng);
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return pick(rng);
}

std::vector<std::size_t> kmeanspp_seeds(const RowMatrix& x, std::span<const double> w, int k, Rng& rng) {
  const auto m = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> seeds;
  seeds.push_back(draw_weighted(w, rng));
  std::vector<double> dist2(m, kInf);
  std::vector<double> score(m);
  while (seeds.size() < static_cast<std::size_t>(k)) {
    const auto last = x.row(static_cast<Eigen::Index>(seeds.back()));
    for (std::size_t i = 0; i < m; ++i) {
      dist2[i] = std::min(dist2[i], (x.row(static_cast<Eigen::Index>(i)) - last).squaredNorm());
      score[i] = w[i] * dist2[i];
    }
    double total = 0.0;
    for (double s : score) total += s;
    seeds.push_back(total > 0.0 ? draw_weighted(score, rng) : draw_weighted(w, rng));
  }
  return seeds;
}

bool converged(double previous, double current, double rel_tol) {
  const double scale = std::max(std::abs(previous), 1e-300);
  return std::abs(current - previous) <= rel_tol * scale;
}

}  // namespace detail

namespace {

constexpr double kDegenerateMass = 1e-10;

Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& sigma, double floor) {
  Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(floor);
  Eigen::MatrixXd out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

Eigen::VectorXd weighted_mean(const RowMatrix& x, std::span<const double> w) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (w[i] > 0.0) mu += w[i] * x.row(i).transpose();
  }
  return mu;
}

Eigen::MatrixXd weighted_covariance(const RowMatrix& x, std::span<const double> w, const Eigen::VectorXd& mu) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (w[i] <= 0.0) continue;
    const Eigen::VectorXd diff = x.row(i).transpose() - mu;
    sigma.noalias() += w[i] * diff * diff.transpose();
  }
  return sigma;
}

struct GmmFit {
  GaussianMixture model;
  std::vector<double> trace;
};

/// Responsibilities (m x K, zero rows for zero-weight points); returns the weighted log-likelihood.
double gmm_e_step(const GaussianMixture& model, const DataMatrix& data, std::span<const double> w,
                  Eigen::MatrixXd& resp) {
  const std::size_t k_count = model.components();
  resp.setZero(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(k_count));
  std::vector<double> terms(k_count);
  double ll = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    if (w[i] <= 0.0) continue;
    for (std::size_t k = 0; k < k_count; ++k) {
      terms[k] = std::log(model.weights()[k]) + model.component_log_density(k, data.row(i));
    }
    const double lse = log_sum_exp(terms);
    for (std::size_t k = 0; k < k_count; ++k) resp(i, k) = std::exp(terms[k] - lse);
    ll += w[i] * lse;
  }
  return ll;
}

GmmFit fit_once(const DataMatrix& data, std::span<const double> w, const EmConfig& cfg, Rng& rng) {
  const RowMatrix& x = data.values();
  const auto d = x.cols();
  const int k_count = cfg.components;

  const Eigen::VectorXd global_mean = weighted_mean(x, w);
  const Eigen::MatrixXd global_cov = floor_eigenvalues(weighted_covariance(x, w, global_mean), cfg.cov_floor);

  const auto seeds = detail::kmeanspp_seeds(x, w, k_count, rng);
  std::vector<double> pi(k_count, 1.0 / k_count);
  std::vector<Eigen::VectorXd> mu;
  std::vector<Eigen::MatrixXd> sigma(k_count, global_cov);
  for (auto s : seeds) mu.push_back(x.row(static_cast<Eigen::Index>(s)).transpose());

  GaussianMixture model(pi, mu, sigma);
  Eigen::MatrixXd resp;
  std::vector<double> trace;
  double ll = gmm_e_step(model, data, w, resp);
  trace.push_back(ll);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    for (int k = 0; k < k_count; ++k) {
      double mass = 0.0;
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (w[i] <= 0.0) continue;
        const double r = w[i] * resp(i, k);
        mass += r;
        mean += r * x.row(i).transpose();
      }
      if (mass < kDegenerateMass) {
        const auto s = detail::draw_weighted(w, rng);
        spdlog::warn("gaussian mixture component {} collapsed (mass {:.3g}); re-seeding at row {}", k, mass, s);
        pi[k] = 1.0 / k_count;
        mu[k] = x.row(static_cast<Eigen::Index>(s)).transpose();
        sigma[k] = global_cov;
        continue;
      }
      mean /= mass;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (w[i] <= 0.0) continue;
        const Eigen::VectorXd diff = x.row(i).transpose() - mean;
        cov.noalias() += (w[i] * resp(i, k)) * diff * diff.transpose();
      }
      pi[k] = mass;
      mu[k] = mean;
      sigma[k] = floor_eigenvalues(cov / mass, cfg.cov_floor);
    }
    double pi_total = 0.0;
    for (double p : pi) pi_total += p;
    for (double& p : pi) p /= pi_total;

    model = GaussianMixture(pi, mu, sigma);
    const double previous = ll;
    ll = gmm_e_step(model, data, w, resp);
    trace.push_back(ll);
    if (detail::converged(previous, ll, cfg.rel_tol)) break;
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != covariances_.size()) {
    throw InvalidInput("gaussian mixture parameter lists must be nonempty and of equal length");
  }
  const auto d = means_.front().size();
  if (d < 1) throw InvalidInput("gaussian mixture dimension must be >= 1");
  double total = 0.0;
  for (double p : weights_) {
    if (!(p >= 0.0)) throw InvalidInput("mixing weights must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("mixing weights must sum to one");
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (means_[k].size() != d || covariances_[k].rows() != d || covariances_[k].cols() != d) {
      throw InvalidInput("gaussian mixture component shapes disagree");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(covariances_[k]);
    if (llt.info() != Eigen::Success) {
      throw InternalConsistencyError("covariance of component " + std::to_string(k) + " is not positive definite");
    }
    Eigen::MatrixXd lower = llt.matrixL();
    double log_det_l = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) log_det_l += std::log(lower(j, j));
    cholesky_.push_back(std::move(lower));
    log_norm_.push_back(-0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) - log_det_l);
  }
}

double GaussianMixture::component_log_density(std::size_t k, Point x) const {
  const Eigen::Map<const Eigen::VectorXd> point(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd diff = point - means_[k];
  const Eigen::VectorXd z = cholesky_[k].triangularView<Eigen::Lower>().solve(diff);
  return log_norm_[k] - 0.5 * z.squaredNorm();
}

double GaussianMixture::log_density(Point x) const {
  require_dim(*this, x);
  double terms_buf[16];
  std::vector<double> terms_vec;
  std::span<double> terms;
  if (weights_.size() <= 16) {
    terms = std::span<double>(terms_buf, weights_.size());
  } else {
    terms_vec.resize(weights_.size());
    terms = terms_vec;
  }
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    terms[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + component_log_density(k, x) : kNegInf;
  }
  return log_sum_exp(terms);
}

std::vector<double> GaussianMixture::log_density_batch(const DataMatrix& data) const {
  if (data.cols() != dim()) throw InvalidInput("data dimension does not match model");
  return LogDensity::log_density_batch(data);
}

DataMatrix GaussianMixture::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw InvalidInput("sample count must be >= 1");
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim());
  RowMatrix out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
    out.row(static_cast<Eigen::Index>(i)) = (means_[k] + cholesky_[k] * z).transpose();
  }
  return DataMatrix::real(std::move(out));
}

Json GaussianMixture::to_json() const {
  Json j;
  j["type"] = "gaussian_mixture";
  j["weights"] = weights_;
  j["means"] = Json::array();
  j["covariances"] = Json::array();
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    j["means"].push_back(std::vector<double>(means_[k].data(), means_[k].data() + means_[k].size()));
    Json cov = Json::array();
    for (Eigen::Index r = 0; r < covariances_[k].rows(); ++r) {
      std::vector<double> row(covariances_[k].cols());
      for (Eigen::Index c = 0; c < covariances_[k].cols(); ++c) row[c] = covariances_[k](r, c);
      cov.push_back(row);
    }
    j["covariances"].push_back(cov);
  }
  return j;
}

GaussianMixture GaussianMixture::from_json(const Json& j) {
  if (j.at("type") != "gaussian_mixture") throw InvalidInput("not a gaussian_mixture document");
  auto weights = j.at("weights").get<std::vector<double>>();
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (const auto& m : j.at("means")) {
    const auto v = m.get<std::vector<double>>();
    means.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  for (const auto& c : j.at("covariances")) {
    const auto rows = c.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd cov(rows.size(), rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size()) throw InvalidInput("covariance must be square");
      for (std::size_t col = 0; col < rows.size(); ++col) cov(r, col) = rows[r][col];
    }
    covs.push_back(std::move(cov));
  }
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

GaussianMixture fit_gmm_weighted(const DataMatrix& data, const PointWeights& weights, const EmConfig& cfg,
                                 EmTrace* trace) {
  cfg.validate();
  if (weights.size() != data.rows()) throw InvalidInput("weight count does not match row count");
  if (data.rows() < static_cast<std::size_t>(cfg.components)) {
    throw InvalidInput("fewer data points than mixture components");
  }
  for (auto kind : data.column_kinds()) {
    if (kind != ColumnKind::kReal) throw InvalidInput("gaussian mixture requires real-valued columns");
  }
  std::optional<GmmFit> best;
  int best_restart = 0;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    GmmFit fit = fit_once(data, weights.values(), cfg, rng);
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

GaussianMixture fit_gmm(const DataMatrix& data, const EmConfig& cfg, EmTrace* trace) {
  return fit_gmm_weighted(data, PointWeights::uniform(data.rows()), cfg, trace);
}

}  // namespace bgm
