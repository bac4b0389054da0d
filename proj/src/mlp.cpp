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

#include "bgm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bgm/errors.hpp"
#include "bgm/numeric.hpp"

namespace bgm {

MlpClassifier::MlpClassifier(std::vector<int> layer_dims, Eigen::VectorXd parameters)
    : dims_(std::move(layer_dims)), params_(std::move(parameters)) {
  if (dims_.size() < 2 || dims_.back() != 1) throw InvalidInput("MLP needs an input layer and a single output");
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] < 1 || dims_[l + 1] < 1) throw InvalidInput("MLP layer widths must be >= 1");
    Layer layer{dims_[l], dims_[l + 1], offset, offset + dims_[l] * dims_[l + 1]};
    offset = layer.b_offset + layer.out;
    layers_.push_back(layer);
  }
  if (params_.size() != offset) throw InvalidInput("MLP parameter vector has the wrong length");
}

MlpClassifier MlpClassifier::random_init(std::size_t input_dim, std::uint64_t seed, const std::vector<int>& hidden) {
  std::vector<int> dims;
  dims.push_back(static_cast<int>(input_dim));
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  Eigen::Index count = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) count += dims[l] * dims[l + 1] + dims[l + 1];
  Eigen::VectorXd params = Eigen::VectorXd::Zero(count);
  Rng rng(seed);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / dims[l]));
    for (Eigen::Index i = 0; i < dims[l] * dims[l + 1]; ++i) params(offset + i) = normal(rng);
    offset += dims[l] * dims[l + 1] + dims[l + 1];
  }
  return MlpClassifier(std::move(dims), std::move(params));
}

void MlpClassifier::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size()) throw InvalidInput("MLP parameter vector has the wrong length");
  params_ = params;
}

double MlpClassifier::score(Point x) const {
  if (x.size() != input_dim()) throw InvalidInput("MLP input dimension mismatch");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + L.w_offset, L.out, L.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b_offset, L.out);
    Eigen::VectorXd z = w * a + b;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a(0);
}

Eigen::VectorXd MlpClassifier::score_batch(const RowMatrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim()) throw InvalidInput("MLP input dimension mismatch");
  Eigen::MatrixXd a = x.transpose();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + L.w_offset, L.out, L.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b_offset, L.out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a.row(0).transpose();
}

Eigen::VectorXd MlpClassifier::backprop(const RowMatrix& x, const Eigen::VectorXd& dv) const {
  if (dv.size() != x.rows()) throw InvalidInput("upstream gradient length does not match batch");
  std::vector<Eigen::MatrixXd> activations;
  activations.emplace_back(x.transpose());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + L.w_offset, L.out, L.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b_offset, L.out);
    Eigen::MatrixXd z = w * activations.back();
    z.colwise() += b;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    activations.push_back(std::move(z));
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = dv.transpose();
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& L = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + L.w_offset, L.out, L.in);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + L.w_offset, L.out, L.in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + L.b_offset, L.out);
    gw.noalias() = delta * activations[l].transpose();
    gb = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = w.transpose() * delta;
    // Rectifier derivative taken as 0 at the kink.
    delta = upstream.cwiseProduct((activations[l].array() > 0.0).cast<double>().matrix());
  }
  return grad;
}

std::vector<bool> MlpClassifier::activation_pattern(const RowMatrix& x) const {
  std::vector<bool> pattern;
  Eigen::MatrixXd a = x.transpose();
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const auto& L = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + L.w_offset, L.out, L.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + L.b_offset, L.out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      for (Eigen::Index i = 0; i < z.rows(); ++i) pattern.push_back(z(i, j) > 0.0);
    }
    a = z.cwiseMax(0.0);
  }
  return pattern;
}

Json MlpClassifier::to_json() const {
  return {{"type", "mlp"},
          {"layer_dims", dims_},
          {"parameters", std::vector<double>(params_.data(), params_.data() + params_.size())}};
}

MlpClassifier MlpClassifier::from_json(const Json& j) {
  if (j.at("type") != "mlp") throw InvalidInput("not an mlp document");
  const auto p = j.at("parameters").get<std::vector<double>>();
  return MlpClassifier(j.at("layer_dims").get<std::vector<int>>(),
                       Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InvalidInput("validation_fraction must lie in (0, 1)");
  }
}

double fdiv_objective(const MlpClassifier& clf, const FDivergence& fdiv, const DataMatrix& pos,
                      const DataMatrix& neg) {
  const Eigen::VectorXd vp = clf.score_batch(pos.values());
  const Eigen::VectorXd vn = clf.score_batch(neg.values());
  double sp = 0.0;
  double sn = 0.0;
  for (Eigen::Index i = 0; i < vp.size(); ++i) sp += fdiv.positive_term(vp(i));
  for (Eigen::Index i = 0; i < vn.size(); ++i) sn += fdiv.negative_term(vn(i));
  return sp / static_cast<double>(vp.size()) - sn / static_cast<double>(vn.size());
}

namespace {

struct Split {
  std::vector<std::size_t> train, valid;
};

Split split_rows(std::size_t n, double fraction, Rng& rng) {
  if (n < 2) throw InvalidInput("each class needs at least two examples to carve a validation split");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_valid = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_valid = std::clamp<std::size_t>(n_valid, 1, n - 1);
  Split s;
  s.valid.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_valid));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_valid), idx.end());
  std::sort(s.valid.begin(), s.valid.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

}  // namespace

TrainResult train_fdiv_classifier(const DataMatrix& pos, const DataMatrix& neg, const FDivergence& fdiv,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (pos.cols() != neg.cols()) throw InvalidInput("positive and negative pools differ in dimension");

  Rng split_rng(derive_seed(cfg.seed, 1));
  const Split ps = split_rows(pos.rows(), cfg.validation_fraction, split_rng);
  const Split ns = split_rows(neg.rows(), cfg.validation_fraction, split_rng);
  const DataMatrix pos_valid = pos.select_rows(ps.valid);
  const DataMatrix neg_valid = neg.select_rows(ns.valid);

  const auto d = static_cast<Eigen::Index>(pos.cols());
  const std::size_t n_train = ps.train.size() + ns.train.size();
  RowMatrix train_x(static_cast<Eigen::Index>(n_train), d);
  std::vector<char> label(n_train);
  for (std::size_t i = 0; i < ps.train.size(); ++i) {
    train_x.row(static_cast<Eigen::Index>(i)) = pos.values().row(static_cast<Eigen::Index>(ps.train[i]));
    label[i] = 1;
  }
  for (std::size_t i = 0; i < ns.train.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(ps.train.size() + i);
    train_x.row(r) = neg.values().row(static_cast<Eigen::Index>(ns.train[i]));
    label[ps.train.size() + i] = 0;
  }

  MlpClassifier clf = MlpClassifier::random_init(pos.cols(), derive_seed(cfg.seed, 2), cfg.hidden);
  TrainResult result{clf, static_cast<double>(ns.train.size()) / static_cast<double>(ps.train.size()), 0.0, 0.0, 0, {}};
  result.initial_validation_objective = fdiv_objective(clf, fdiv, pos_valid, neg_valid);
  if (!std::isfinite(result.initial_validation_objective)) {
    throw TrainingFailure(0, "validation objective is not finite at initialization");
  }
  result.best_validation_objective = result.initial_validation_objective;
  result.validation_curve.push_back(result.initial_validation_objective);

  Eigen::VectorXd params = clf.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
  long long step = 0;

  Rng shuffle_rng(derive_seed(cfg.seed, 3));
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  RowMatrix batch;
  Eigen::VectorXd dv;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
      const auto b = static_cast<Eigen::Index>(end - start);
      batch.resize(b, d);
      for (Eigen::Index i = 0; i < b; ++i) batch.row(i) = train_x.row(static_cast<Eigen::Index>(order[start + i]));
      const Eigen::VectorXd v = clf.score_batch(batch);
      dv.resize(b);
      double objective = 0.0;
      for (Eigen::Index i = 0; i < b; ++i) {
        if (label[order[start + i]]) {
          objective += fdiv.positive_term(v(i));
          dv(i) = fdiv.positive_term_grad(v(i));
        } else {
          objective -= fdiv.negative_term(v(i));
          dv(i) = -fdiv.negative_term_grad(v(i));
        }
      }
      if (!std::isfinite(objective) || !dv.allFinite()) throw TrainingFailure(epoch, "minibatch objective is not finite");
      dv /= static_cast<double>(b);
      const Eigen::VectorXd g = clf.backprop(batch, dv);
      ++step;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      // Gradient ascent on the objective.
      params.array() += cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
      if (!params.allFinite()) throw TrainingFailure(epoch, "parameters became non-finite");
      clf.set_parameters(params);
    }
    const double val = fdiv_objective(clf, fdiv, pos_valid, neg_valid);
    if (!std::isfinite(val)) throw TrainingFailure(epoch, "validation objective is not finite");
    result.validation_curve.push_back(val);
    if (val > result.best_validation_objective) {
      result.best_validation_objective = val;
      result.best_epoch = epoch;
      result.classifier = clf;
    }
  }
  return result;
}

TrainResult train_ce_classifier(const DataMatrix& pos, const DataMatrix& neg, const TrainConfig& cfg) {
  return train_fdiv_classifier(pos, neg, FDivergence::nce(), cfg);
}

GradientCheck gradient_check_detail(const MlpClassifier& clf, const FDivergence& fdiv, const DataMatrix& pos_probe,
                                    const DataMatrix& neg_probe, double step) {
  const auto np = static_cast<Eigen::Index>(pos_probe.rows());
  const auto nn = static_cast<Eigen::Index>(neg_probe.rows());
  RowMatrix all(np + nn, pos_probe.values().cols());
  all.topRows(np) = pos_probe.values();
  all.bottomRows(nn) = neg_probe.values();
  const Eigen::VectorXd v = clf.score_batch(all);
  Eigen::VectorXd dv(np + nn);
  for (Eigen::Index i = 0; i < np; ++i) dv(i) = fdiv.positive_term_grad(v(i)) / static_cast<double>(np);
  for (Eigen::Index i = 0; i < nn; ++i) dv(np + i) = -fdiv.negative_term_grad(v(np + i)) / static_cast<double>(nn);
  const Eigen::VectorXd analytic = clf.backprop(all, dv);
  const std::vector<bool> pattern = clf.activation_pattern(all);

  // Central differences lose about eps |f| / step to round-off, so components smaller than
  // 1e-6 |f| are compared on an absolute scale.
  const double floor = 1e-6 * std::max(1.0, std::abs(fdiv_objective(clf, fdiv, pos_probe, neg_probe)));
  MlpClassifier probe = clf;
  Eigen::VectorXd params = clf.parameters();
  GradientCheck out;
  for (Eigen::Index p = 0; p < params.size(); ++p) {
    const double saved = params(p);
    params(p) = saved + step;
    probe.set_parameters(params);
    const double up = fdiv_objective(probe, fdiv, pos_probe, neg_probe);
    bool kink = probe.activation_pattern(all) != pattern;
    params(p) = saved - step;
    probe.set_parameters(params);
    const double down = fdiv_objective(probe, fdiv, pos_probe, neg_probe);
    kink = kink || probe.activation_pattern(all) != pattern;
    params(p) = saved;
    if (kink) {
      // The difference quotient straddles two linear pieces.
      ++out.skipped_at_kinks;
      continue;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(analytic(p)), std::abs(numeric), floor});
    out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic(p) - numeric) / scale);
    ++out.checked;
  }
  return out;
}

double gradient_check(const MlpClassifier& clf, const FDivergence& fdiv, const DataMatrix& pos_probe,
                      const DataMatrix& neg_probe, double step) {
  return gradient_check_detail(clf, fdiv, pos_probe, neg_probe, step).max_relative_error;
}

double log_density_ratio(const MlpClassifier& clf, const FDivergence& fdiv, double gamma, Point x) {
  if (!(gamma > 0.0)) throw InvalidInput("gamma must be positive");
  return std::log(gamma) + fdiv.log_ratio_map(clf.score(x));
}

DensityRatioModel::DensityRatioModel(MlpClassifier classifier, FDivergence fdiv, double gamma)
    : clf_(std::move(classifier)), fdiv_(fdiv), gamma_(gamma) {
  if (!(gamma_ > 0.0)) throw InvalidInput("gamma must be positive");
}

double DensityRatioModel::log_density(Point x) const { return log_density_ratio(clf_, fdiv_, gamma_, x); }

std::vector<double> DensityRatioModel::log_density_batch(const DataMatrix& data) const {
  if (data.cols() != dim()) throw InvalidInput("data dimension does not match model");
  constexpr Eigen::Index kChunk = 4096;
  const double log_gamma = std::log(gamma_);
  const RowMatrix& x = data.values();
  std::vector<double> out(data.rows());
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.rows() - start);
    const Eigen::VectorXd v = clf_.score_batch(x.middleRows(start, n));
    for (Eigen::Index i = 0; i < n; ++i) out[start + i] = log_gamma + fdiv_.log_ratio_map(v(i));
  }
  return out;
}

Json DensityRatioModel::to_json() const {
  return {{"type", "density_ratio"}, {"fdiv", fdiv_.name()}, {"gamma", gamma_}, {"classifier", clf_.to_json()}};
}

DensityRatioModel DensityRatioModel::from_json(const Json& j) {
  if (j.at("type") != "density_ratio") throw InvalidInput("not a density_ratio document");
  return DensityRatioModel(MlpClassifier::from_json(j.at("classifier")),
                           FDivergence::from_name(j.at("fdiv").get<std::string>()), j.at("gamma").get<double>());
}

}  // namespace bgm
