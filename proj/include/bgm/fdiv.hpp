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

#ifndef BGM_FDIV_HPP
#define BGM_FDIV_HPP

#include <string>
#include <string_view>

namespace bgm {

enum class FDivKind { kNce, kHellinger };

/// An f-divergence as used by a density-ratio classifier.
///
/// A raw classifier score v is mapped into the conjugate's domain by output_map.
/// The variational objective is E_P[output_map(v)] - E_Q[f_star(output_map(v))],
/// maximized at output_map(v) = f'(p/q). The implied ratio is ratio_map(r) = [f']^-1(r).
///
/// NCE uses f(u) = u log u - (u+1) log(u+1), whose bound is the negative cross-entropy
/// of a logistic classifier (output_map(v) = log sigmoid(v)).
/// HD uses f(u) = (sqrt(u) - 1)^2 with output_map(v) = 1 - exp(-v).
class FDivergence {
 public:
  static FDivergence nce() { return FDivergence(FDivKind::kNce); }
  static FDivergence hellinger() { return FDivergence(FDivKind::kHellinger); }
  /// Accepts "NCE" or "HD" (case-insensitive).
  static FDivergence from_name(std::string_view name);

  FDivKind kind() const { return kind_; }
  std::string name() const;

  double f(double u) const;
  double f_prime(double u) const;
  /// +inf outside the conjugate's domain.
  double f_star(double t) const;
  bool in_conjugate_domain(double t) const;

  double output_map(double v) const;
  /// [f']^-1(r). Throws InternalConsistencyError when r is outside dom f_star.
  double ratio_map(double r) const;
  /// log ratio_map(output_map(v)) in closed form.
  double log_ratio_map(double v) const;

  /// output_map(v) and its derivative in v.
  double positive_term(double v) const;
  double positive_term_grad(double v) const;
  /// f_star(output_map(v)) and its derivative in v.
  double negative_term(double v) const;
  double negative_term_grad(double v) const;

 private:
  explicit FDivergence(FDivKind kind) : kind_(kind) {}

  FDivKind kind_;
};

}  // namespace bgm

#endif
