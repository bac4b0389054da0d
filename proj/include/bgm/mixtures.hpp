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

#ifndef BGM_MIXTURES_HPP
#define BGM_MIXTURES_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bgm/core.hpp"

namespace bgm {

struct EmConfig {
  int components = 2;
  int max_iters = 500;
  double rel_tol = 1e-6;
  int n_restarts = 5;
  std::uint64_t seed = 0;
  double cov_floor = 1e-6;
  double eps_theta = 1e-3;

  void validate() const;
};

/// Weighted log-likelihood after every EM iteration of the winning restart.
struct EmTrace {
  std::vector<double> log_likelihood;
  int restart = 0;
};

class GaussianMixture : public GenerativeModel {
 public:
  /// Throws InternalConsistencyError when a covariance is not positive definite.
  GaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                  std::vector<Eigen::MatrixXd> covariances);

  std::size_t components() const { return weights_.size(); }
  std::size_t dim() const override { return static_cast<std::size_t>(means_.front().size()); }
  double log_density(Point x) const override;
  std::vector<double> log_density_batch(const DataMatrix& data) const override;
  DataMatrix sample(std::size_t n, std::uint64_t seed) const override;
  Json to_json() const override;
  static GaussianMixture from_json(const Json& j);

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }

  /// log N(x; mu_k, sigma_k).
  double component_log_density(std::size_t k, Point x) const;

 private:
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Eigen::MatrixXd> cholesky_;  // lower factors
  std::vector<double> log_norm_;           // -d/2 log 2pi - log det L
};

class BernoulliMixture : public GenerativeModel {
 public:
  /// theta is K x d of success probabilities, each strictly inside (0, 1).
  BernoulliMixture(std::vector<double> weights, Eigen::MatrixXd theta);

  std::size_t components() const { return weights_.size(); }
  std::size_t dim() const override { return static_cast<std::size_t>(theta_.cols()); }
  double log_density(Point x) const override;
  std::vector<double> log_density_batch(const DataMatrix& data) const override;
  DataMatrix sample(std::size_t n, std::uint64_t seed) const override;
  Json to_json() const override;
  static BernoulliMixture from_json(const Json& j);

  const std::vector<double>& weights() const { return weights_; }
  const Eigen::MatrixXd& theta() const { return theta_; }

 private:
  std::vector<double> weights_;
  Eigen::MatrixXd theta_;
  Eigen::MatrixXd logit_;        // log theta - log(1 - theta)
  Eigen::VectorXd log_off_sum_;  // sum_j log(1 - theta_kj)
};

/// Weighted maximum likelihood by EM with full covariances. Best of cfg.n_restarts wins.
GaussianMixture fit_gmm_weighted(const DataMatrix& data, const PointWeights& weights, const EmConfig& cfg,
                                 EmTrace* trace = nullptr);
GaussianMixture fit_gmm(const DataMatrix& data, const EmConfig& cfg, EmTrace* trace = nullptr);

/// Weighted maximum likelihood by EM; theta clipped to [eps_theta, 1 - eps_theta] after each M-step.
BernoulliMixture fit_mob_weighted(const DataMatrix& data, const PointWeights& weights, const EmConfig& cfg,
                                  EmTrace* trace = nullptr);
BernoulliMixture fit_mob(const DataMatrix& data, const EmConfig& cfg, EmTrace* trace = nullptr);

inline DataMatrix ancestral_sample(const GenerativeModel& model, std::size_t n, std::uint64_t seed) {
  return model.sample(n, seed);
}

}  // namespace bgm

#endif
