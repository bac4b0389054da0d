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

#ifndef BGM_ORACLES_HPP
#define BGM_ORACLES_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "bgm/core.hpp"

namespace bgm {

inline constexpr int kMaxEnumerationDim = 20;

/// Index of a binary point: bit j is x_j.
std::size_t state_index(Point x);
std::vector<double> state_point(std::size_t index, int d);
/// All 2^d binary states, row r equal to state_point(r, d).
DataMatrix all_states(int d);

/// Explicit probability table over {0,1}^d.
class TabularDensity : public GenerativeModel {
 public:
  TabularDensity(int d, std::vector<double> probs);
  /// Normalizes exp(log_values) with a max shift.
  static TabularDensity from_log_unnormalized(int d, std::span<const double> log_values);
  /// Normalized exp(log f(x)) over all states of the given model.
  static TabularDensity from_model(const LogDensity& model);

  std::size_t dim() const override { return static_cast<std::size_t>(d_); }
  double log_density(Point x) const override;
  DataMatrix sample(std::size_t n, std::uint64_t seed) const override;
  Json to_json() const override;

  const std::vector<double>& probs() const { return probs_; }
  double prob(std::size_t index) const { return probs_[index]; }

 private:
  int d_;
  std::vector<double> probs_;
};

/// Arbitrary nonnegative table over {0,1}^d held as logs (e.g. an exact density ratio).
class TableFunction : public LogDensity {
 public:
  TableFunction(int d, std::vector<double> log_values);

  std::size_t dim() const override { return static_cast<std::size_t>(d_); }
  double log_density(Point x) const override;
  Json to_json() const override;

  const std::vector<double>& log_values() const { return log_values_; }

 private:
  int d_;
  std::vector<double> log_values_;
};

/// log sum over {0,1}^d of exp(log f(x)). Refuses d > 20.
double enumerate_log_partition(const LogDensity& model, int d);

/// KL(P || Q) with Q the normalized version of model; +inf when Q misses P's support.
double exact_kl(const TabularDensity& p, const LogDensity& model);

struct Bounds2d {
  double x_min, x_max, y_min, y_max;
};

/// Midpoint-rule integral of exp(log_density(x, y)) over the box on a resolution^2 grid.
double grid_quadrature_2d(const std::function<double(double, double)>& log_density, const Bounds2d& bounds,
                          int resolution);
/// log of the midpoint-rule integral, evaluated in the log domain (batched for LogDensity models).
double grid_log_integral_2d(const LogDensity& model, const Bounds2d& bounds, int resolution);

}  // namespace bgm

#endif
