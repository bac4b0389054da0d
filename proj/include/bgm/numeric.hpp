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

#ifndef BGM_NUMERIC_HPP
#define BGM_NUMERIC_HPP

#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace bgm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log(sum(exp(v))) with a max shift. Empty input or all -inf gives -inf.
double log_sum_exp(std::span<const double> values);

/// log(mean(exp(v))).
double log_mean_exp(std::span<const double> values);

/// log(1 + exp(v)) without overflow.
double softplus(double v);

/// 1 / (1 + exp(-v)) without overflow.
double logistic(double v);

using Rng = std::mt19937_64;

/// Deterministic child seed for an independent stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace bgm

#endif
