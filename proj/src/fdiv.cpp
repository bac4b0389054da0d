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

#include "bgm/fdiv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "bgm/errors.hpp"
#include "bgm/numeric.hpp"

namespace bgm {

FDivergence FDivergence::from_name(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "NCE") return nce();
  if (upper == "HD" || upper == "HELLINGER") return hellinger();
  throw InvalidInput("unknown f-divergence '" + std::string(name) + "'");
}

std::string FDivergence::name() const { return kind_ == FDivKind::kNce ? "NCE" : "HD"; }

double FDivergence::f(double u) const {
  if (kind_ == FDivKind::kNce) {
    const double a = u > 0.0 ? u * std::log(u) : 0.0;
    return a - (u + 1.0) * std::log1p(u);
  }
  const double s = std::sqrt(u) - 1.0;
  return s * s;
}

double FDivergence::f_prime(double u) const {
  if (kind_ == FDivKind::kNce) return std::log(u) - std::log1p(u);
  return 1.0 - 1.0 / std::sqrt(u);
}

bool FDivergence::in_conjugate_domain(double t) const {
  if (kind_ == FDivKind::kNce) return t < 0.0;
  return t < 1.0;
}

double FDivergence::f_star(double t) const {
  if (!in_conjugate_domain(t)) return kInf;
  if (kind_ == FDivKind::kNce) return -std::log(-std::expm1(t));
  return t / (1.0 - t);
}

double FDivergence::output_map(double v) const {
  if (kind_ == FDivKind::kNce) return -softplus(-v);
  return -std::expm1(-v);
}

double FDivergence::ratio_map(double r) const {
  if (!in_conjugate_domain(r)) {
    throw InternalConsistencyError(name() + " classifier output " + std::to_string(r) + " is outside dom f*");
  }
  if (kind_ == FDivKind::kNce) {
    const double e = std::exp(r);
    return e / (1.0 - e);
  }
  const double s = 1.0 - r;
  return 1.0 / (s * s);
}

double FDivergence::log_ratio_map(double v) const {
  // NCE: log(c / (1 - c)) with c = sigmoid(v) is v. HD: -2 log(exp(-v)) is 2v.
  if (kind_ == FDivKind::kNce) return v;
  return 2.0 * v;
}

double FDivergence::positive_term(double v) const { return output_map(v); }

double FDivergence::positive_term_grad(double v) const {
  if (kind_ == FDivKind::kNce) return logistic(-v);
  return std::exp(-v);
}

double FDivergence::negative_term(double v) const {
  // f*(log sigmoid v) = softplus(v); f*(1 - exp(-v)) = exp(v) - 1.
  if (kind_ == FDivKind::kNce) return softplus(v);
  return std::expm1(v);
}

double FDivergence::negative_term_grad(double v) const {
  if (kind_ == FDivKind::kNce) return logistic(v);
  return std::exp(v);
}

}  // namespace bgm
