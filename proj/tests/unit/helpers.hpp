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

#ifndef BGM_TESTS_HELPERS_HPP
#define BGM_TESTS_HELPERS_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "bgm/core.hpp"
#include "bgm/mixtures.hpp"
#include "bgm/numeric.hpp"
#include "bgm/oracles.hpp"

namespace bgm::test {

/// f(x) = c everywhere.
class ConstantDensity : public LogDensity {
 public:
  ConstantDensity(std::size_t d, double log_c) : d_(d), log_c_(log_c) {}
  std::size_t dim() const override { return d_; }
  double log_density(Point) const override { return log_c_; }
  Json to_json() const override { return {{"type", "constant"}, {"log_c", log_c_}}; }

 private:
  std::size_t d_;
  double log_c_;
};

/// Wraps another density and adds a constant to its log.
class ShiftedDensity : public LogDensity {
 public:
  ShiftedDensity(std::shared_ptr<const LogDensity> inner, double shift) : inner_(std::move(inner)), shift_(shift) {}
  std::size_t dim() const override { return inner_->dim(); }
  double log_density(Point x) const override { return inner_->log_density(x) + shift_; }
  Json to_json() const override { return {{"type", "shifted"}}; }

 private:
  std::shared_ptr<const LogDensity> inner_;
  double shift_;
};

inline GaussianMixture standard_normal(int d) {
  return GaussianMixture({1.0}, {Eigen::VectorXd::Zero(d)}, {Eigen::MatrixXd::Identity(d, d)});
}

inline GaussianMixture random_gmm(int d, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& v : w) total += (v = u(rng));
  for (auto& v : w) v /= total;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd mu(d);
    for (int j = 0; j < d; ++j) mu(j) = 2.0 * n(rng);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) a(i, j) = 0.5 * n(rng);
    }
    means.push_back(mu);
    covs.push_back(a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d));
  }
  return GaussianMixture(w, means, covs);
}

/// Strictly positive random table over {0,1}^d.
inline TabularDensity random_table(int d, std::uint64_t seed, double spread = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, spread);
  std::vector<double> logs(std::size_t{1} << d);
  for (auto& v : logs) v = n(rng);
  return TabularDensity::from_log_unnormalized(d, logs);
}

/// log p(x) - log q(x) for every state, as a table.
inline std::shared_ptr<TableFunction> log_ratio_table(const LogDensity& p, const LogDensity& q, double scale = 1.0) {
  const int d = static_cast<int>(p.dim());
  const auto lp = p.log_density_batch(all_states(d));
  const auto lq = q.log_density_batch(all_states(d));
  std::vector<double> out(lp.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * (lp[i] - lq[i]);
  return std::make_shared<TableFunction>(d, std::move(out));
}

inline DataMatrix real_rows(std::initializer_list<std::initializer_list<double>> rows) {
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return DataMatrix::real(std::move(m));
}

}  // namespace bgm::test

#endif
