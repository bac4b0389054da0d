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

#include "bgm/oracles.hpp"

#include <cmath>
#include <random>

#include "bgm/errors.hpp"
#include "bgm/numeric.hpp"

namespace bgm {

namespace {

void check_enumerable(int d) {
  if (d < 1) throw InvalidInput("enumeration dimension must be >= 1");
  if (d > kMaxEnumerationDim) {
    throw InvalidInput("refusing to enumerate 2^" + std::to_string(d) + " states (limit d <= 20)");
  }
}

std::size_t state_count(int d) { return std::size_t{1} << d; }

}  // namespace

std::size_t state_index(Point x) {
  std::size_t index = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0 && x[j] != 1.0) throw InvalidInput("state coordinates must be 0 or 1");
    if (x[j] == 1.0) index |= std::size_t{1} << j;
  }
  return index;
}

std::vector<double> state_point(std::size_t index, int d) {
  std::vector<double> x(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) x[j] = (index >> j) & 1U ? 1.0 : 0.0;
  return x;
}

DataMatrix all_states(int d) {
  check_enumerable(d);
  const std::size_t n = state_count(d);
  RowMatrix values(static_cast<Eigen::Index>(n), d);
  for (std::size_t s = 0; s < n; ++s) {
    for (int j = 0; j < d; ++j) values(static_cast<Eigen::Index>(s), j) = (s >> j) & 1U ? 1.0 : 0.0;
  }
  return DataMatrix::binary(std::move(values));
}

TabularDensity::TabularDensity(int d, std::vector<double> probs) : d_(d), probs_(std::move(probs)) {
  check_enumerable(d);
  if (probs_.size() != state_count(d)) throw InvalidInput("probability table must have 2^d entries");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw InvalidInput("probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("probability table must sum to one");
}

TabularDensity TabularDensity::from_log_unnormalized(int d, std::span<const double> log_values) {
  check_enumerable(d);
  if (log_values.size() != state_count(d)) throw InvalidInput("log table must have 2^d entries");
  const double log_z = log_sum_exp(log_values);
  if (!std::isfinite(log_z)) throw InvalidInput("log table does not normalize to a finite mass");
  std::vector<double> probs(log_values.size());
  double total = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    probs[s] = std::exp(log_values[s] - log_z);
    total += probs[s];
  }
  for (double& p : probs) p /= total;
  return TabularDensity(d, std::move(probs));
}

TabularDensity TabularDensity::from_model(const LogDensity& model) {
  const int d = static_cast<int>(model.dim());
  const auto logs = model.log_density_batch(all_states(d));
  return from_log_unnormalized(d, logs);
}

double TabularDensity::log_density(Point x) const {
  require_dim(*this, x);
  return std::log(probs_[state_index(x)]);
}

DataMatrix TabularDensity::sample(std::size_t n, std::uint64_t seed) const {
  if (n < 1) throw InvalidInput("sample count must be >= 1");
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(probs_.begin(), probs_.end());
  RowMatrix out(static_cast<Eigen::Index>(n), d_);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = pick(rng);
    for (int j = 0; j < d_; ++j) out(static_cast<Eigen::Index>(i), j) = (s >> j) & 1U ? 1.0 : 0.0;
  }
  return DataMatrix::binary(std::move(out));
}

Json TabularDensity::to_json() const { return {{"type", "tabular_density"}, {"d", d_}, {"probs", probs_}}; }

TableFunction::TableFunction(int d, std::vector<double> log_values) : d_(d), log_values_(std::move(log_values)) {
  check_enumerable(d);
  if (log_values_.size() != state_count(d)) throw InvalidInput("log table must have 2^d entries");
  for (double v : log_values_) {
    if (std::isnan(v) || v == kInf) throw InvalidInput("log table entries must be < +inf");
  }
}

double TableFunction::log_density(Point x) const {
  require_dim(*this, x);
  return log_values_[state_index(x)];
}

Json TableFunction::to_json() const {
  // -inf is not representable in JSON; store it as null.
  Json values = Json::array();
  for (double v : log_values_) values.push_back(std::isfinite(v) ? Json(v) : Json(nullptr));
  return {{"type", "table_function"}, {"d", d_}, {"log_values", values}};
}

double enumerate_log_partition(const LogDensity& model, int d) {
  check_enumerable(d);
  if (model.dim() != static_cast<std::size_t>(d)) throw InvalidInput("model dimension does not match d");
  // Streaming log-sum-exp: running max with rescaled accumulator.
  const std::size_t n = state_count(d);
  double running_max = kNegInf;
  double acc = 0.0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t s = 0; s < n; ++s) {
    for (int j = 0; j < d; ++j) x[j] = (s >> j) & 1U ? 1.0 : 0.0;
    const double v = model.log_density(x);
    if (v == kNegInf) continue;
    if (v > running_max) {
      acc = acc * std::exp(running_max - v) + 1.0;
      running_max = v;
    } else {
      acc += std::exp(v - running_max);
    }
  }
  if (running_max == kNegInf) return kNegInf;
  return running_max + std::log(acc);
}

double exact_kl(const TabularDensity& p, const LogDensity& model) {
  const int d = static_cast<int>(p.dim());
  if (model.dim() != p.dim()) throw InvalidInput("model dimension does not match table");
  const double log_z = enumerate_log_partition(model, d);
  double kl = 0.0;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (std::size_t s = 0; s < p.probs().size(); ++s) {
    const double ps = p.prob(s);
    if (ps == 0.0) continue;
    for (int j = 0; j < d; ++j) x[j] = (s >> j) & 1U ? 1.0 : 0.0;
    const double log_q = model.log_density(x) - log_z;
    if (log_q == kNegInf) return kInf;
    kl += ps * (std::log(ps) - log_q);
  }
  return kl;
}

double grid_quadrature_2d(const std::function<double(double, double)>& log_density, const Bounds2d& bounds,
                          int resolution) {
  if (resolution < 1) throw InvalidInput("resolution must be >= 1");
  const double hx = (bounds.x_max - bounds.x_min) / resolution;
  const double hy = (bounds.y_max - bounds.y_min) / resolution;
  double total = 0.0;
  for (int i = 0; i < resolution; ++i) {
    const double x = bounds.x_min + (i + 0.5) * hx;
    for (int j = 0; j < resolution; ++j) {
      const double y = bounds.y_min + (j + 0.5) * hy;
      total += std::exp(log_density(x, y));
    }
  }
  return total * hx * hy;
}

double grid_log_integral_2d(const LogDensity& model, const Bounds2d& bounds, int resolution) {
  if (resolution < 1) throw InvalidInput("resolution must be >= 1");
  if (model.dim() != 2) throw InvalidInput("grid integration needs a 2-D model");
  const double hx = (bounds.x_max - bounds.x_min) / resolution;
  const double hy = (bounds.y_max - bounds.y_min) / resolution;
  RowMatrix grid(static_cast<Eigen::Index>(resolution) * resolution, 2);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const auto r = static_cast<Eigen::Index>(i) * resolution + j;
      grid(r, 0) = bounds.x_min + (i + 0.5) * hx;
      grid(r, 1) = bounds.y_min + (j + 0.5) * hy;
    }
  }
  const auto logs = model.log_density_batch(DataMatrix::real(std::move(grid)));
  return log_sum_exp(logs) + std::log(hx * hy);
}

}  // namespace bgm
