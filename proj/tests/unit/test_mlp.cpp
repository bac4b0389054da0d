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

#include <doctest.h>

#include <cmath>

#include "bgm/errors.hpp"
#include "bgm/mlp.hpp"
#include "bgm/numeric.hpp"
#include "helpers.hpp"

using namespace bgm;

namespace {

DataMatrix shifted_normal(double shift, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(shift, 1.0);
  RowMatrix x(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) = g(rng);
  return DataMatrix::real(std::move(x));
}

TrainConfig quick(int epochs = 20) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.learning_rate = 1e-3;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("parameter layout") {
    const auto clf = MlpClassifier::random_init(5, 1);
    CHECK(clf.parameter_count() == static_cast<std::size_t>(5 * 100 + 100 + 100 * 100 + 100 + 100 + 1));
    CHECK_THROWS_AS(MlpClassifier({3, 2}, Eigen::VectorXd::Zero(8)), InvalidInput);
    CHECK_THROWS_AS(MlpClassifier({3, 1}, Eigen::VectorXd::Zero(3)), InvalidInput);
    // v(x) = 2 x0 - x1 + 0.5
    Eigen::VectorXd p(3);
    p << 2.0, -1.0, 0.5;
    const MlpClassifier lin({2, 1}, p);
    const std::vector<double> x = {1.0, 3.0};
    CHECK(lin.score(x) == doctest::Approx(-0.5));
  }

  TEST_CASE("backprop agrees with finite differences") {
    const DataMatrix pos = test::random_gmm(3, 2, 1).sample(16, 1);
    const DataMatrix neg = test::random_gmm(3, 2, 2).sample(16, 2);
    const auto clf = MlpClassifier::random_init(3, 7, {8, 8});
    CHECK(gradient_check(clf, FDivergence::nce(), pos, neg) < 1e-4);
    CHECK(gradient_check(clf, FDivergence::hellinger(), pos, neg) < 1e-4);
  }

  TEST_CASE("finite differences skip rectifier kinks") {
    // One hidden unit sitting just above its kink for the positive probe.
    Eigen::VectorXd p(4);
    p << 1.0, 0.0, 1.0, 0.0;
    const MlpClassifier tiny({1, 1, 1}, p);
    RowMatrix xp(1, 1), xn(1, 1);
    xp << 1e-7;
    xn << 5.0;
    const auto check = gradient_check_detail(tiny, FDivergence::nce(), DataMatrix::real(xp), DataMatrix::real(xn));
    CHECK(check.skipped_at_kinks == 1);
    CHECK(check.checked == 3);
    CHECK(check.max_relative_error < 1e-4);
  }

  TEST_CASE("log density ratio from a known score") {
    const MlpClassifier zero({1, 1}, Eigen::VectorXd::Zero(2));
    const std::vector<double> x = {4.0};
    CHECK(log_density_ratio(zero, FDivergence::nce(), 1.0, x) == 0.0);
    CHECK(log_density_ratio(zero, FDivergence::nce(), 2.0, x) == doctest::Approx(std::log(2.0)));
    Eigen::VectorXd p(2);
    p << 0.0, 0.5;
    const MlpClassifier constant({1, 1}, p);
    CHECK(log_density_ratio(constant, FDivergence::nce(), 2.0, x) == doctest::Approx(0.5 + std::log(2.0)));
    CHECK(log_density_ratio(constant, FDivergence::hellinger(), 2.0, x) == doctest::Approx(1.0 + std::log(2.0)));
    CHECK(log_density_ratio(constant, FDivergence::nce(), 1.0, x) == doctest::Approx(0.5));
    CHECK_THROWS_AS(log_density_ratio(constant, FDivergence::nce(), 0.0, x), InvalidInput);
  }

  TEST_CASE("identical pools give a flat ratio") {
    const DataMatrix pos = shifted_normal(0.0, 3000, 1);
    const DataMatrix neg = shifted_normal(0.0, 3000, 2);
    const auto result = train_fdiv_classifier(pos, neg, FDivergence::nce(), quick());
    CHECK(result.gamma == doctest::Approx(1.0));
    const DensityRatioModel h(result.classifier, FDivergence::nce(), result.gamma);
    const DataMatrix probes = shifted_normal(0.0, 1000, 3);
    double mean_abs = 0.0;
    for (double v : h.log_density_batch(probes)) mean_abs += std::abs(v);
    CHECK(mean_abs / 1000.0 < 0.1);
    // The population value of the objective at P = Q is f(1) = -log 4.
    CHECK(std::abs(fdiv_objective(result.classifier, FDivergence::nce(), pos, neg) + std::log(4.0)) < 0.02);
    CHECK(result.best_validation_objective >= result.initial_validation_objective);
  }

  TEST_CASE("shifted Gaussians recover the analytic log ratio") {
    // log N(x; 2, 1) - log N(x; -2, 1) = 4x
    const DataMatrix pos = shifted_normal(2.0, 20000, 4);
    const DataMatrix neg = shifted_normal(-2.0, 20000, 5);
    TrainConfig cfg = quick(40);
    cfg.learning_rate = 1e-4;
    for (const auto& fd : {FDivergence::nce(), FDivergence::hellinger()}) {
      const auto result = train_fdiv_classifier(pos, neg, fd, cfg);
      const DensityRatioModel h(result.classifier, fd, result.gamma);
      for (double x = -1.0; x <= 1.0; x += 0.25) {
        const std::vector<double> pt = {x};
        CHECK(std::abs(h.log_density(pt) - 4.0 * x) < 0.5);
      }
      if (fd.kind() == FDivKind::kNce) {
        // Never worse than the uninformative classifier c = 1/2.
        CHECK(fdiv_objective(result.classifier, fd, pos, neg) >= -std::log(4.0));
      }
    }
  }

  TEST_CASE("separable pools are classified perfectly") {
    const DataMatrix pos = shifted_normal(10.0, 500, 6);
    const DataMatrix neg = shifted_normal(-10.0, 500, 7);
    const auto result = train_ce_classifier(pos, neg, quick(30));
    int correct = 0;
    for (std::size_t i = 0; i < pos.rows(); ++i) correct += result.classifier.score(pos.row(i)) > 0.0;
    for (std::size_t i = 0; i < neg.rows(); ++i) correct += result.classifier.score(neg.row(i)) < 0.0;
    CHECK(correct == 1000);
  }

  TEST_CASE("gamma is the training-split class ratio") {
    const DataMatrix pos = shifted_normal(0.0, 1000, 8);
    const DataMatrix neg = shifted_normal(0.0, 3000, 9);
    const auto result = train_fdiv_classifier(pos, neg, FDivergence::hellinger(), quick(2));
    CHECK(result.gamma == doctest::Approx(2700.0 / 900.0));
  }

  TEST_CASE("training is deterministic per seed") {
    const DataMatrix pos = shifted_normal(0.5, 400, 1);
    const DataMatrix neg = shifted_normal(-0.5, 400, 2);
    const auto a = train_fdiv_classifier(pos, neg, FDivergence::hellinger(), quick(3));
    const auto b = train_fdiv_classifier(pos, neg, FDivergence::hellinger(), quick(3));
    CHECK(a.classifier.parameters() == b.classifier.parameters());
    CHECK(a.validation_curve == b.validation_curve);
  }

  TEST_CASE("config validation and failures") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    const DataMatrix one = shifted_normal(0.0, 1, 1);
    CHECK_THROWS_AS(train_fdiv_classifier(one, one, FDivergence::nce(), quick()), InvalidInput);
  }

  TEST_CASE("JSON round trip") {
    const DensityRatioModel h(MlpClassifier::random_init(2, 4, {5}), FDivergence::hellinger(), 1.7);
    const auto back = DensityRatioModel::from_json(h.to_json());
    const std::vector<double> x = {0.4, -2.0};
    CHECK(back.log_density(x) == doctest::Approx(h.log_density(x)).epsilon(1e-14));
    CHECK(back.gamma() == 1.7);
  }
}
