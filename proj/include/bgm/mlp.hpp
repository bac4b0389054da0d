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

#ifndef BGM_MLP_HPP
#define BGM_MLP_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "bgm/core.hpp"
#include "bgm/fdiv.hpp"

namespace bgm {

/// Fully connected network with rectifier hidden layers and a single linear output v(x).
/// Parameters live in one flat vector, layer by layer: W (out x in, column-major) then b.
class MlpClassifier {
 public:
  MlpClassifier(std::vector<int> layer_dims, Eigen::VectorXd parameters);

  /// He-normal weights, zero biases.
  static MlpClassifier random_init(std::size_t input_dim, std::uint64_t seed, const std::vector<int>& hidden = {100, 100});

  const std::vector<int>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(dims_.front()); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);

  double score(Point x) const;
  /// Raw scores for every row of x.
  Eigen::VectorXd score_batch(const RowMatrix& x) const;
  /// Gradient with respect to the parameters of sum_i dv(i) * v(x_i).
  Eigen::VectorXd backprop(const RowMatrix& x, const Eigen::VectorXd& dv) const;
  /// Which hidden rectifiers are active, unit by unit then row by row.
  std::vector<bool> activation_pattern(const RowMatrix& x) const;

  Json to_json() const;
  static MlpClassifier from_json(const Json& j);

 private:
  struct Layer {
    Eigen::Index in, out, w_offset, b_offset;
  };

  std::vector<int> dims_;
  std::vector<Layer> layers_;
  Eigen::VectorXd params_;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 100;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {100, 100};

  void validate() const;
};

struct TrainResult {
  MlpClassifier classifier;
  /// Negative-to-positive count ratio of the training split.
  double gamma = 1.0;
  double initial_validation_objective = 0.0;
  double best_validation_objective = 0.0;
  /// 0 means the initialization was never beaten.
  int best_epoch = 0;
  std::vector<double> validation_curve;
};

/// Variational objective mean_pos[output_map(v)] - mean_neg[f*(output_map(v))].
double fdiv_objective(const MlpClassifier& clf, const FDivergence& fdiv, const DataMatrix& pos,
                      const DataMatrix& neg);

/// Adam on pooled minibatches of positives (label 1) and negatives (label 0). Returns the
/// snapshot with the best validation objective. Throws TrainingFailure on a non-finite loss.
TrainResult train_fdiv_classifier(const DataMatrix& pos, const DataMatrix& neg, const FDivergence& fdiv,
                                  const TrainConfig& cfg);

/// Cross-entropy training, i.e. the NCE objective mean_pos[log c] + mean_neg[log(1 - c)].
TrainResult train_ce_classifier(const DataMatrix& pos, const DataMatrix& neg, const TrainConfig& cfg);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Components whose +-step perturbation flips a rectifier on some probe row.
  std::size_t skipped_at_kinks = 0;
};

/// Compares backprop gradients of the variational objective on (pos_probe, neg_probe) with
/// central finite differences. Components below 1e-6 max(1, |objective|) are compared on that
/// absolute scale.
GradientCheck gradient_check_detail(const MlpClassifier& clf, const FDivergence& fdiv, const DataMatrix& pos_probe,
                                    const DataMatrix& neg_probe, double step = 1e-5);
/// gradient_check_detail(...).max_relative_error
double gradient_check(const MlpClassifier& clf, const FDivergence& fdiv, const DataMatrix& pos_probe,
                      const DataMatrix& neg_probe, double step = 1e-5);

/// log h(x) = log gamma + log [f']^-1(output_map(v(x))).
double log_density_ratio(const MlpClassifier& clf, const FDivergence& fdiv, double gamma, Point x);

/// Classifier-implied density ratio used as a discriminative ensemble member.
class DensityRatioModel : public LogDensity {
 public:
  DensityRatioModel(MlpClassifier classifier, FDivergence fdiv, double gamma);

  std::size_t dim() const override { return clf_.input_dim(); }
  double log_density(Point x) const override;
  std::vector<double> log_density_batch(const DataMatrix& data) const override;
  Json to_json() const override;
  static DensityRatioModel from_json(const Json& j);

  const MlpClassifier& classifier() const { return clf_; }
  const FDivergence& fdiv() const { return fdiv_; }
  double gamma() const { return gamma_; }

 private:
  MlpClassifier clf_;
  FDivergence fdiv_;
  double gamma_;
};

}  // namespace bgm

#endif
