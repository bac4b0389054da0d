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

#ifndef BGM_SRC_EM_COMMON_HPP
#define BGM_SRC_EM_COMMON_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "bgm/core.hpp"
#include "bgm/numeric.hpp"

namespace bgm::detail {

/// Index drawn with probability proportional to weights (all zero falls back to uniform).
std::size_t draw_weighted(std::span<const double> weights, Rng& rng);

/// Weighted k-means++ seeding: first seed ~ w, later seeds ~ w_i * D^2(x_i).
std::vector<std::size_t> kmeanspp_seeds(const RowMatrix& x, std::span<const double> w, int k, Rng& rng);

bool converged(double previous, double current, double rel_tol);

}  // namespace bgm::detail

#endif
