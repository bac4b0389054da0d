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

#include "bgm/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bgm/errors.hpp"
#include "bgm/numeric.hpp"

namespace bgm {

DataMatrix::DataMatrix(RowMatrix values, std::vector<ColumnKind> kinds)
    : values_(std::move(values)), kinds_(std::move(kinds)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw InvalidInput("data matrix must have at least one row and one column");
  }
  if (kinds_.size() != cols()) throw InvalidInput("column kind count does not match column count");
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      const double v = values_(i, j);
      if (!std::isfinite(v)) throw InvalidInput("data matrix entries must be finite");
      if (kinds_[j] == ColumnKind::kBinary && v != 0.0 && v != 1.0) {
        throw InvalidInput("binary column " + std::to_string(j) + " holds a value other than 0 or 1");
      }
    }
  }
}

DataMatrix DataMatrix::real(RowMatrix values) {
  std::vector<ColumnKind> kinds(values.cols(), ColumnKind::kReal);
  return DataMatrix(std::move(values), std::move(kinds));
}

DataMatrix DataMatrix::binary(RowMatrix values) {
  std::vector<ColumnKind> kinds(values.cols(), ColumnKind::kBinary);
  return DataMatrix(std::move(values), std::move(kinds));
}

bool DataMatrix::all_binary() const {
  return std::all_of(kinds_.begin(), kinds_.end(), [](ColumnKind k) { return k == ColumnKind::kBinary; });
}

DataMatrix DataMatrix::select_rows(std::span<const std::size_t> indices) const {
  RowMatrix out(indices.size(), values_.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows()) throw InvalidInput("row index out of range");
    out.row(r) = values_.row(indices[r]);
  }
  return DataMatrix(std::move(out), kinds_);
}

PointWeights::PointWeights(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw InvalidInput("point weights must be nonempty");
  double total = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("point weights must be finite and nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("point weights must sum to one");
}

PointWeights PointWeights::uniform(std::size_t m) {
  if (m == 0) throw InvalidInput("point weights must be nonempty");
  return PointWeights(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

PointWeights PointWeights::from_log(std::span<const double> log_w) {
  if (log_w.empty()) throw InvalidInput("point weights must be nonempty");
  double max_value = kNegInf;
  for (double v : log_w) {
    if (std::isnan(v)) throw InvalidInput("log weight is NaN");
    max_value = std::max(max_value, v);
  }
  if (max_value == kNegInf) throw InvalidInput("all point weights are zero");
  std::vector<double> w(log_w.size());
  if (max_value == kInf) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = log_w[i] == kInf ? 1.0 : 0.0;
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - max_value);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  // Rounding can leave the sum a few ulps away from one.
  const double drift = 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
  *std::max_element(w.begin(), w.end()) += drift;
  return PointWeights(std::move(w));
}

std::vector<double> LogDensity::log_density_batch(const DataMatrix& data) const {
  std::vector<double> out(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out[i] = log_density(data.row(i));
  return out;
}

std::string to_string(MemberKind kind) {
  return kind == MemberKind::kGenerator ? "generator" : "discriminator";
}

std::string to_string(LogZSource source) {
  switch (source) {
    case LogZSource::kImportanceSampling:
      return "importance_sampling";
    case LogZSource::kEnumeration:
      return "enumeration";
    case LogZSource::kQuadrature:
      return "quadrature";
  }
  return "unknown";
}

void require_dim(const LogDensity& model, Point x) {
  if (x.size() != model.dim()) {
    throw InvalidInput("point has dimension " + std::to_string(x.size()) + ", model expects " +
                       std::to_string(model.dim()));
  }
}

namespace {

void check_member(const EnsembleMember& m) {
  if (!m.learner) throw InvalidInput("ensemble member has no learner");
  if (!(m.alpha >= 0.0 && m.alpha <= 1.0)) throw InvalidInput("member alpha must lie in [0, 1]");
}

}  // namespace

MultiplicativeEnsemble::MultiplicativeEnsemble(EnsembleMember base) {
  check_member(base);
  if (base.kind != MemberKind::kGenerator) throw InvalidInput("the base member must be a generator");
  dim_ = base.learner->dim();
  members_.push_back(std::move(base));
}

void MultiplicativeEnsemble::append(EnsembleMember member) {
  check_member(member);
  if (member.learner->dim() != dim_) throw InvalidInput("member dimension does not match ensemble");
  members_.push_back(std::move(member));
  log_z_.reset();
}

double MultiplicativeEnsemble::log_density(Point x) const {
  require_dim(*this, x);
  double total = 0.0;
  for (const auto& m : members_) {
    // alpha = 0 members are skipped so that 0 * -inf never arises.
    if (m.alpha == 0.0) continue;
    total += m.alpha * m.learner->log_density(x);
  }
  return total;
}

std::vector<double> MultiplicativeEnsemble::log_density_batch(const DataMatrix& data) const {
  if (data.cols() != dim_) throw InvalidInput("data dimension does not match ensemble");
  std::vector<double> total(data.rows(), 0.0);
  for (const auto& m : members_) {
    if (m.alpha == 0.0) continue;
    const auto part = m.learner->log_density_batch(data);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += m.alpha * part[i];
  }
  return total;
}

MultiplicativeEnsemble MultiplicativeEnsemble::prefix(std::size_t t) const {
  if (t >= members_.size()) throw InvalidInput("prefix round exceeds ensemble size");
  MultiplicativeEnsemble out(members_.front());
  for (std::size_t i = 1; i <= t; ++i) out.append(members_[i]);
  return out;
}

Json MultiplicativeEnsemble::to_json() const {
  Json j;
  j["type"] = "multiplicative_ensemble";
  j["dim"] = dim_;
  j["members"] = Json::array();
  for (const auto& m : members_) {
    j["members"].push_back({{"kind", to_string(m.kind)}, {"alpha", m.alpha}, {"learner", m.learner->to_json()}});
  }
  if (log_z_) {
    j["log_z"] = {{"estimate", log_z_->estimate},
                  {"std_error", log_z_->std_error},
                  {"sample_size", log_z_->sample_size},
                  {"source", to_string(log_z_->source)}};
  }
  return j;
}

double mult_log_unnorm_density(const MultiplicativeEnsemble& ens, Point x) { return ens.log_density(x); }

AdditiveEnsemble::AdditiveEnsemble(std::vector<AdditiveMember> members) : members_(std::move(members)) {
  if (members_.empty()) throw InvalidInput("additive ensemble needs at least one member");
  double total = 0.0;
  for (const auto& m : members_) {
    if (!m.learner) throw InvalidInput("ensemble member has no learner");
    if (!(m.alpha_hat >= 0.0)) throw InvalidInput("mixture weights must be nonnegative");
    if (m.learner->dim() != members_.front().learner->dim()) throw InvalidInput("member dimensions differ");
    total += m.alpha_hat;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("mixture weights must sum to one");
}

AdditiveEnsemble::AdditiveEnsemble(std::shared_ptr<const LogDensity> base)
    : AdditiveEnsemble(std::vector<AdditiveMember>{{std::move(base), 1.0}}) {}

void AdditiveEnsemble::mix_in(std::shared_ptr<const LogDensity> learner, double alpha_hat) {
  if (!learner) throw InvalidInput("ensemble member has no learner");
  if (!(alpha_hat >= 0.0 && alpha_hat <= 1.0)) throw InvalidInput("mixing weight must lie in [0, 1]");
  if (learner->dim() != dim()) throw InvalidInput("member dimension does not match ensemble");
  for (auto& m : members_) m.alpha_hat *= 1.0 - alpha_hat;
  members_.push_back({std::move(learner), alpha_hat});
}

double AdditiveEnsemble::log_density(Point x) const {
  require_dim(*this, x);
  std::vector<double> terms;
  terms.reserve(members_.size());
  for (const auto& m : members_) {
    if (m.alpha_hat == 0.0) continue;
    terms.push_back(std::log(m.alpha_hat) + m.learner->log_density(x));
  }
  return log_sum_exp(terms);
}

std::vector<double> AdditiveEnsemble::log_density_batch(const DataMatrix& data) const {
  if (data.cols() != dim()) throw InvalidInput("data dimension does not match ensemble");
  std::vector<std::vector<double>> parts;
  std::vector<double> log_weights;
  for (const auto& m : members_) {
    if (m.alpha_hat == 0.0) continue;
    parts.push_back(m.learner->log_density_batch(data));
    log_weights.push_back(std::log(m.alpha_hat));
  }
  std::vector<double> out(data.rows());
  std::vector<double> terms(parts.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < parts.size(); ++k) terms[k] = log_weights[k] + parts[k][i];
    out[i] = log_sum_exp(terms);
  }
  return out;
}

Json AdditiveEnsemble::to_json() const {
  Json j;
  j["type"] = "additive_ensemble";
  j["dim"] = dim();
  j["members"] = Json::array();
  for (const auto& m : members_) {
    j["members"].push_back({{"alpha_hat", m.alpha_hat}, {"learner", m.learner->to_json()}});
  }
  return j;
}

double add_log_density(const AdditiveEnsemble& ens, Point x) { return ens.log_density(x); }

double avg_nll(const LogDensity& model, const DataMatrix& data, double log_z) {
  if (data.cols() != model.dim()) throw InvalidInput("data dimension does not match model");
  const auto logs = model.log_density_batch(data);
  double total = 0.0;
  for (double v : logs) total += log_z - v;
  return total / static_cast<double>(logs.size());
}

}  // namespace bgm
