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
#include "bgm/inference.hpp"
#include "bgm/mixtures.hpp"
#include "bgm/numeric.hpp"
#include "bgm/oracles.hpp"
#include "helpers.hpp"

using namespace bgm;

namespace {

MhConfig discrete(std::size_t burn_in, std::uint64_t seed, std::size_t chains = 1) {
  MhConfig cfg;
  cfg.proposal = MhProposal::kUniformDiscrete;
  cfg.burn_in = burn_in;
  cfg.seed = seed;
  cfg.n_chains = chains;
  return cfg;
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("importance sampling recovers known partitions") {
    const auto g = test::random_gmm(2, 2, 3);
    const auto same = estimate_log_partition(g, g, 20000, 1);
    CHECK(std::abs(same.log_z) < 1e-12);
    CHECK(same.std_error < 1e-12);
    CHECK(same.ess == doctest::Approx(20000.0));

    auto inner = std::make_shared<GaussianMixture>(g);
    const test::ShiftedDensity scaled(inner, std::log(3.5));
    CHECK(estimate_log_partition(scaled, g, 1000, 2).log_z == doctest::Approx(std::log(3.5)).epsilon(1e-12));

    // A wider proposal: the estimate should land within a few standard errors.
    const auto wide = GaussianMixture({1.0}, {Eigen::VectorXd::Zero(2)}, {9.0 * Eigen::MatrixXd::Identity(2, 2)});
    const auto est = estimate_log_partition(scaled, wide, 200000, 3);
    CHECK(std::abs(est.log_z - std::log(3.5)) < 4.0 * est.std_error + 1e-3);
    CHECK(est.ess < 200000.0);
    CHECK(est.as_partition().source == LogZSource::kImportanceSampling);
  }

  TEST_CASE("importance sampling is reproducible and fails loudly") {
    const auto g = test::random_gmm(2, 2, 3);
    const auto wide = GaussianMixture({1.0}, {Eigen::VectorXd::Zero(2)}, {4.0 * Eigen::MatrixXd::Identity(2, 2)});
    CHECK(estimate_log_partition(g, wide, 70000, 9).log_z == estimate_log_partition(g, wide, 70000, 9).log_z);
    const test::ConstantDensity dead(2, kNegInf);
    CHECK_THROWS_AS(estimate_log_partition(dead, g, 100, 1), EstimationFailure);
  }

  TEST_CASE("acceptance probability") {
    CHECK(mh_acceptance_probability(-1.0, -0.5) == 1.0);
    CHECK(mh_acceptance_probability(0.0, std::log(0.25)) == doctest::Approx(0.25));
    CHECK(mh_acceptance_probability(0.0, kNegInf) == 0.0);
  }

  TEST_CASE("uniform-discrete kernel leaves the target invariant") {
    const auto target = test::random_table(4, 5, 2.0);
    const Eigen::MatrixXd t = uniform_discrete_transition_matrix(target);
    Eigen::RowVectorXd pi(16);
    for (int s = 0; s < 16; ++s) pi(s) = target.prob(static_cast<std::size_t>(s));
    CHECK((pi * t - pi).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((t.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(t.minCoeff() >= 0.0);
  }

  TEST_CASE("uniform target gives fair bits") {
    const test::ConstantDensity flat(6, 0.0);
    const auto res = mh_sample(flat, discrete(100, 4), 20000);
    const double mean = res.samples.values().mean();
    CHECK(std::abs(mean - 0.5) < 4.0 * 0.5 / std::sqrt(20000.0 * 6.0));
    CHECK(res.diagnostics.acceptance_rate == doctest::Approx(1.0));
    CHECK(res.samples.all_binary());
  }

  TEST_CASE("MH marginals match a tabular target") {
    const auto target = test::random_table(5, 8, 1.0);
    const auto res = mh_sample(target, discrete(1000, 6, 20), 40000);
    CHECK(res.samples.rows() == 40000);
    for (int j = 0; j < 5; ++j) {
      double exact = 0.0;
      for (std::size_t s = 0; s < 32; ++s) exact += ((s >> j) & 1) ? target.prob(s) : 0.0;
      const double sd = std::sqrt(exact * (1 - exact) / 40000.0);
      // Correlated draws: allow a generous multiple of the iid error.
      CHECK(std::abs(res.samples.values().col(j).mean() - exact) < 8.0 * sd);
    }
  }

  TEST_CASE("random-walk MH matches a Gaussian mixture mean") {
    const auto g = GaussianMixture({0.3, 0.7}, {Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d(1.0, 0.5)},
                                   {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)});
    MhConfig cfg;
    cfg.proposal = MhProposal::kGaussianRandomWalk;
    cfg.burn_in = 500;
    cfg.n_chains = 2000;
    cfg.seed = 2;
    const auto res = mh_sample(g, cfg, 2000, g);
    const Eigen::RowVectorXd mean = res.samples.values().colwise().mean();
    // Independent chains started from the target itself give iid draws.
    CHECK(std::abs(mean(0) - 0.4) < 3.0 * std::sqrt(1.84 / 2000.0));
    CHECK(std::abs(mean(1) - 0.35) < 3.0 * std::sqrt(1.0525 / 2000.0));
    CHECK(res.diagnostics.acceptance_rate > 0.3);
    CHECK(res.diagnostics.n_chains == 2000);
  }

  TEST_CASE("sampling is reproducible and validates its input") {
    const auto target = test::random_table(4, 1);
    CHECK(mh_sample(target, discrete(50, 3, 4), 100).samples.values() ==
          mh_sample(target, discrete(50, 3, 4), 100).samples.values());
    MhConfig bad;
    bad.thin = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    MhConfig rw;
    rw.proposal = MhProposal::kGaussianRandomWalk;
    CHECK_THROWS_AS(mh_sample(test::standard_normal(2), rw, 10), InvalidInput);
    const std::vector<double> nowhere = {0.0, 0.0};
    const test::ConstantDensity dead(2, kNegInf);
    CHECK_THROWS_AS(mh_sample(dead, discrete(10, 1), 10, nowhere), SamplerError);
  }

  TEST_CASE("thinning keeps every k-th draw") {
    const test::ConstantDensity flat(3, 0.0);
    MhConfig cfg = discrete(10, 2);
    cfg.thin = 5;
    const auto res = mh_sample(flat, cfg, 100);
    CHECK(res.samples.rows() == 100);
    CHECK(res.diagnostics.total_steps == 10 + 5 * 100);
  }

  TEST_CASE("conditional prediction") {
    Eigen::MatrixXd theta(1, 3);
    theta << 0.2, 0.7, 0.9;
    const BernoulliMixture single({1.0}, theta);
    const std::vector<double> x = {1, 0, 0};
    CHECK(conditional_predict(single, x, 1).prob_one == doctest::Approx(0.7).epsilon(1e-12));

    auto table = std::make_shared<TabularDensity>(test::random_table(4, 3));
    const test::ShiftedDensity scaled(table, 12.0);
    const std::vector<double> y = {0, 1, 1, 0};
    for (std::size_t j = 0; j < 4; ++j) {
      const double p = conditional_predict(*table, y, j).prob_one;
      CHECK(conditional_predict(scaled, y, j).prob_one == doctest::Approx(p).epsilon(1e-12));
      std::vector<double> one = y, zero = y;
      one[j] = 1.0;
      zero[j] = 0.0;
      const double p1 = table->prob(state_index(one));
      CHECK(std::abs(p - p1 / (p1 + table->prob(state_index(zero)))) <= 1e-12);
    }

    const test::ConstantDensity dead(4, kNegInf);
    const auto degenerate = conditional_predict(dead, y, 0);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.prob_one == 0.5);
  }

  TEST_CASE("one-out accuracy") {
    const test::ConstantDensity flat(3, 0.0);
    RowMatrix m(2, 3);
    m << 1, 0, 1, 0, 0, 0;
    const auto acc = eval_one_out_accuracy(flat, DataMatrix::binary(m));
    // Every probability is exactly one half, which predicts 1.
    CHECK(acc.n_predictions == 6);
    CHECK(acc.accuracy == doctest::Approx(2.0 / 6.0));

    // A perfect model scored on its own distribution: the expected accuracy is the
    // table's Bayes accuracy, sum_x p(x) mean_j [x_j == argmax p(x_j | x_rest)].
    const auto table = test::random_table(4, 19, 1.5);
    const DataMatrix all = all_states(4);
    double bayes = 0.0;
    for (std::size_t s = 0; s < all.rows(); ++s) {
      for (std::size_t j = 0; j < 4; ++j) {
        std::vector<double> one(all.row(s).begin(), all.row(s).end()), zero = one;
        one[j] = 1.0;
        zero[j] = 0.0;
        const double p1 = table.prob(state_index(one)), p0 = table.prob(state_index(zero));
        const double predicted = p1 >= p0 ? 1.0 : 0.0;
        bayes += table.prob(s) * (predicted == all.row(s)[j] ? 0.25 : 0.0);
      }
    }
    const DataMatrix draws = table.sample(50000, 7);
    const double empirical = eval_one_out_accuracy(table, draws).accuracy;
    CHECK(std::abs(empirical - bayes) < 4.0 * std::sqrt(0.25 / 50000.0));

    Eigen::MatrixXd theta(1, 3);
    theta << 0.9, 0.1, 0.9;
    const BernoulliMixture sharp({1.0}, theta);
    CHECK(eval_one_out_accuracy(sharp, DataMatrix::binary(m)).accuracy == doctest::Approx(4.0 / 6.0));
  }
}
