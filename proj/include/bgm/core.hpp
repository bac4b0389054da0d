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

#ifndef BGM_CORE_HPP
#define BGM_CORE_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace bgm {

using Json = nlohmann::json;
using Point = std::span<const double>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ColumnKind { kBinary, kReal };

/// m x d observations, one example per row. Binary columns hold exactly 0.0 or 1.0.
class DataMatrix {
 public:
  DataMatrix(RowMatrix values, std::vector<ColumnKind> kinds);

  static DataMatrix real(RowMatrix values);
  static DataMatrix binary(RowMatrix values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }

  Point row(std::size_t i) const { return {values_.data() + i * cols(), cols()}; }
  const RowMatrix& values() const { return values_; }
  const std::vector<ColumnKind>& column_kinds() const { return kinds_; }
  bool all_binary() const;

  DataMatrix select_rows(std::span<const std::size_t> indices) const;

 private:
  RowMatrix values_;
  std::vector<ColumnKind> kinds_;
};

/// Normalized per-example weights.
class PointWeights {
 public:
  explicit PointWeights(std::vector<double> w);

  static PointWeights uniform(std::size_t m);
  /// Normalizes exp(log_w) with a max shift. Entries equal to +inf share all the mass.
  static PointWeights from_log(std::span<const double> log_w);

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const { return w_; }

 private:
  std::vector<double> w_;
};

/// Anything that can report log f(x) for a nonnegative f. Not necessarily normalized.
/// Implementations are immutable once built and safe to evaluate concurrently.
class LogDensity {
 public:
  virtual ~LogDensity() = default;

  virtual std::size_t dim() const = 0;
  virtual double log_density(Point x) const = 0;
  virtual std::vector<double> log_density_batch(const DataMatrix& data) const;
  virtual Json to_json() const = 0;
};

/// A normalized density that can also draw i.i.d. samples.
class GenerativeModel : public LogDensity {
 public:
  virtual DataMatrix sample(std::size_t n, std::uint64_t seed) const = 0;
};

enum class MemberKind { kGenerator, kDiscriminator };

std::string to_string(MemberKind kind);

struct EnsembleMember {
  std::shared_ptr<const LogDensity> learner;
  double alpha = 1.0;
  MemberKind kind = MemberKind::kGenerator;
};

enum class LogZSource { kImportanceSampling, kEnumeration, kQuadrature };

std::string to_string(LogZSource source);

struct LogPartition {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t sample_size = 0;
  LogZSource source = LogZSource::kImportanceSampling;
};

/// Weighted geometric product of members: log q~(x) = sum_t alpha_t log h_t(x).
class MultiplicativeEnsemble : public LogDensity {
 public:
  explicit MultiplicativeEnsemble(EnsembleMember base);

  void append(EnsembleMember member);

  std::size_t dim() const override { return dim_; }
  double log_density(Point x) const override;
  std::vector<double> log_density_batch(const DataMatrix& data) const override;
  Json to_json() const override;

  const std::vector<EnsembleMember>& members() const { return members_; }
  std::size_t rounds() const { return members_.size() - 1; }
  /// Ensemble made of members 0..t.
  MultiplicativeEnsemble prefix(std::size_t t) const;

  const std::optional<LogPartition>& log_z() const { return log_z_; }
  void set_log_z(LogPartition z) { log_z_ = z; }

 private:
  std::vector<EnsembleMember> members_;
  std::size_t dim_;
  std::optional<LogPartition> log_z_;
};

/// log q~(x) for a multiplicative ensemble.
double mult_log_unnorm_density(const MultiplicativeEnsemble& ens, Point x);

struct AdditiveMember {
  std::shared_ptr<const LogDensity> learner;
  double alpha_hat = 1.0;
};

/// Convex mixture of normalized members: q(x) = sum_t alpha_hat_t h_t(x).
class AdditiveEnsemble : public LogDensity {
 public:
  explicit AdditiveEnsemble(std::vector<AdditiveMember> members);
  explicit AdditiveEnsemble(std::shared_ptr<const LogDensity> base);

  /// q_t = (1 - alpha_hat) q_{t-1} + alpha_hat h.
  void mix_in(std::shared_ptr<const LogDensity> learner, double alpha_hat);

  std::size_t dim() const override { return members_.front().learner->dim(); }
  double log_density(Point x) const override;
  std::vector<double> log_density_batch(const DataMatrix& data) const override;
  Json to_json() const override;

  const std::vector<AdditiveMember>& members() const { return members_; }

 private:
  std::vector<AdditiveMember> members_;
};

double add_log_density(const AdditiveEnsemble& ens, Point x);

/// Mean of log_z - log q~(x_i) over the rows of data.
double avg_nll(const LogDensity& model, const DataMatrix& data, double log_z = 0.0);

void require_dim(const LogDensity& model, Point x);

}  // namespace bgm

#endif
