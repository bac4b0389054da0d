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

#include "bgm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>

#include <spdlog/spdlog.h>

#include "bgm/errors.hpp"
#include "bgm/inference.hpp"
#include "bgm/numeric.hpp"

namespace bgm {

namespace fs = std::filesystem;

namespace {

enum : std::uint64_t { kTrainStream = 0xDA7A, kTestStream = 0x7E57, kLogZStream = 0x1062, kSampleStream = 0x5A3F };

EmConfig parse_em(const Json& j, EmConfig em) {
  em.components = j.value("components", em.components);
  em.max_iters = j.value("max_iters", em.max_iters);
  em.rel_tol = j.value("rel_tol", em.rel_tol);
  em.n_restarts = j.value("n_restarts", em.n_restarts);
  em.cov_floor = j.value("cov_floor", em.cov_floor);
  em.eps_theta = j.value("eps_theta", em.eps_theta);
  em.validate();
  return em;
}

TrainConfig parse_train(const Json& j, TrainConfig t) {
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.epsilon = j.value("epsilon", t.epsilon);
  t.validation_fraction = j.value("validation_fraction", t.validation_fraction);
  t.hidden = j.value("hidden", t.hidden);
  t.validate();
  return t;
}

MhConfig parse_mh(const Json& j, MhConfig mh) {
  if (j.contains("proposal")) {
    const auto p = j.at("proposal").get<std::string>();
    if (p == "uniform_discrete") {
      mh.proposal = MhProposal::kUniformDiscrete;
    } else if (p == "gaussian_rw") {
      mh.proposal = MhProposal::kGaussianRandomWalk;
    } else {
      throw InvalidInput("unknown MH proposal '" + p + "'");
    }
  }
  mh.step = j.value("step", mh.step);
  mh.burn_in = j.value("burn_in", mh.burn_in);
  mh.thin = j.value("thin", mh.thin);
  mh.n_chains = j.value("n_chains", mh.n_chains);
  mh.validate();
  return mh;
}

RoundSpec parse_round(const Json& j, const EmConfig& em, const TrainConfig& train) {
  const std::string kind = j.at("kind").get<std::string>();
  RoundSpec r;
  if (kind == "generative" || kind == "gen") {
    r = RoundSpec::generative(j.value("beta", 1.0), parse_em(j, em));
  } else if (kind == "discriminative" || kind == "disc") {
    r = RoundSpec::discriminative(FDivergence::from_name(j.value("fdiv", std::string("NCE"))), parse_train(j, train));
  } else {
    throw InvalidInput("unknown round kind '" + kind + "'");
  }
  if (j.contains("alpha")) r.alpha = j.at("alpha").get<double>();
  r.validate();
  return r;
}

std::vector<RoundSpec> repeat_rounds(const RoundSpec& r, int n) { return std::vector<RoundSpec>(static_cast<std::size_t>(n), r); }

fs::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  fs::path dir = cfg.output_dir / ("seed_" + std::to_string(seed));
  fs::create_directories(dir);
  return dir;
}

Json stamped(const std::string& hash, Json body) {
  body["config_hash"] = hash;
  return body;
}

Bounds2d default_bounds(const DataMatrix& data) {
  const auto lo = data.values().colwise().minCoeff();
  const auto hi = data.values().colwise().maxCoeff();
  const double px = 0.5 * (hi(0) - lo(0)) + 3.0;
  const double py = 0.5 * (hi(1) - lo(1)) + 3.0;
  return {lo(0) - px, hi(0) + px, lo(1) - py, hi(1) + py};
}

struct Built {
  std::shared_ptr<const LogDensity> model;
  std::shared_ptr<const GenerativeModel> base;
  std::vector<RoundRecord> rounds;
  std::optional<LogPartition> log_z;
  bool normalized = false;
};

struct LogZResult {
  LogPartition partition;
  std::string method;
  std::optional<double> ess;
};

LogZResult compute_log_z(const Built& built, const LogZConfig& lc, const Bounds2d& bounds, bool binary,
                         std::uint64_t seed) {
  if (built.normalized) return {{0.0, 0.0, 0, LogZSource::kEnumeration}, "normalized", std::nullopt};
  const std::size_t d = built.model->dim();
  std::string method = lc.method;
  if (method == "auto") {
    if (built.log_z) return {*built.log_z, "stored", std::nullopt};
    method = (d == 2 && !binary) ? "quadrature" : (binary && d <= kMaxEnumerationDim) ? "enumerate" : "is";
  }
  if (method == "quadrature") {
    const double z = grid_log_integral_2d(*built.model, lc.bounds.value_or(bounds), lc.resolution);
    return {{z, 0.0, static_cast<std::size_t>(lc.resolution) * lc.resolution, LogZSource::kQuadrature}, method,
            std::nullopt};
  }
  if (method == "enumerate") {
    const double z = enumerate_log_partition(*built.model, static_cast<int>(d));
    return {{z, 0.0, std::size_t{1} << d, LogZSource::kEnumeration}, method, std::nullopt};
  }
  if (method == "is") {
    if (!built.base) throw InvalidInput("importance sampling needs a generative base model as proposal");
    const LogZEstimate est =
        estimate_log_partition(*built.model, *built.base, lc.n, derive_seed(seed, kLogZStream), "base");
    return {est.as_partition(), method, est.ess};
  }
  throw InvalidInput("unknown log Z method '" + method + "'");
}

Json log_z_json(const LogZResult& z) {
  Json j{{"log_z", z.partition.estimate}, {"log_z_stderr", z.partition.std_error}, {"log_z_method", z.method}};
  if (z.ess) j["ess"] = *z.ess;
  return j;
}

Json rounds_json(const std::vector<RoundRecord>& rounds) {
  Json arr = Json::array();
  for (const auto& r : rounds) arr.push_back(r.to_json());
  return arr;
}

BoostOptions boost_options(const ExperimentConfig& cfg, std::uint64_t seed, bool binary) {
  BoostOptions opts;
  opts.base = cfg.base;
  opts.heuristic = cfg.heuristic;
  opts.seed = seed;
  opts.mh = cfg.mh ? *cfg.mh : binary ? BoostOptions::binary_mh_preset() : BoostOptions::continuous_mh_preset();
  opts.negative_ratio = cfg.negative_ratio;
  opts.report_conditions = cfg.report_conditions;
  return opts;
}

Built fit_model(const ExperimentConfig& cfg, std::uint64_t seed, const DataMatrix& train, bool report_conditions) {
  BoostOptions opts = boost_options(cfg, seed, train.all_binary());
  opts.report_conditions = report_conditions;
  Built b;
  if (cfg.method == "base") {
    b.base = fit_base(train, cfg.base, derive_seed(seed, 0));
    b.model = b.base;
    b.normalized = true;
  } else if (cfg.method == "additive") {
    AdditiveResult r = run_additive(train, cfg.rounds, opts);
    b.base = std::dynamic_pointer_cast<const GenerativeModel>(r.ensemble.members().front().learner);
    b.model = std::make_shared<AdditiveEnsemble>(std::move(r.ensemble));
    b.rounds = std::move(r.rounds);
    b.normalized = true;
  } else {
    BoostResult r = cfg.method == "genbgm"    ? run_genbgm(train, cfg.rounds, opts)
                    : cfg.method == "discbgm" ? run_discbgm(train, cfg.rounds, opts)
                                              : run_hybrid(train, cfg.rounds, opts);
    b.base = std::dynamic_pointer_cast<const GenerativeModel>(r.ensemble.members().front().learner);
    b.normalized = r.ensemble.rounds() == 0 && r.ensemble.members().front().alpha == 1.0;
    b.model = std::make_shared<MultiplicativeEnsemble>(std::move(r.ensemble));
    b.rounds = std::move(r.rounds);
  }
  return b;
}

Built load_built(const fs::path& path) {
  Built b;
  b.model = load_model(path);
  if (auto ens = std::dynamic_pointer_cast<const MultiplicativeEnsemble>(b.model)) {
    b.base = std::dynamic_pointer_cast<const GenerativeModel>(ens->members().front().learner);
    b.log_z = ens->log_z();
  } else if (auto add = std::dynamic_pointer_cast<const AdditiveEnsemble>(b.model)) {
    b.base = std::dynamic_pointer_cast<const GenerativeModel>(add->members().front().learner);
    b.normalized = true;
  } else {
    b.base = std::dynamic_pointer_cast<const GenerativeModel>(b.model);
    b.normalized = b.base != nullptr;
  }
  return b;
}

// Draws from an additive ensemble by picking a member per draw.
DataMatrix sample_additive(const AdditiveEnsemble& add, std::size_t n, std::uint64_t seed) {
  std::vector<double> weights;
  for (const auto& m : add.members()) weights.push_back(m.alpha_hat);
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<std::size_t> counts(weights.size(), 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[pick(rng)];
  RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(add.dim()));
  std::vector<ColumnKind> kinds;
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    auto gen = std::dynamic_pointer_cast<const GenerativeModel>(add.members()[k].learner);
    if (!gen) throw InvalidInput("additive member cannot be sampled");
    const DataMatrix draws = gen->sample(counts[k], derive_seed(seed, k + 1));
    kinds = draws.column_kinds();
    out.middleRows(row, draws.values().rows()) = draws.values();
    row += draws.values().rows();
  }
  std::vector<Eigen::Index> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);
  std::shuffle(order.begin(), order.end(), rng);
  RowMatrix shuffled(out.rows(), out.cols());
  for (std::size_t i = 0; i < n; ++i) shuffled.row(static_cast<Eigen::Index>(i)) = out.row(order[i]);
  return DataMatrix(std::move(shuffled), std::move(kinds));
}

MhResult sample_built(const Built& b, std::size_t n, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (auto ens = std::dynamic_pointer_cast<const MultiplicativeEnsemble>(b.model)) {
    if (!b.base) throw InvalidInput("ensemble base is not a sampler");
    const bool binary = b.base->sample(1, seed).all_binary();
    MhConfig mh = cfg.mh ? *cfg.mh : binary ? BoostOptions::binary_mh_preset() : BoostOptions::continuous_mh_preset();
    mh.proposal = binary ? MhProposal::kUniformDiscrete : MhProposal::kGaussianRandomWalk;
    return sample_ensemble(*ens, *b.base, n, mh, seed);
  }
  MhDiagnostics diag;
  diag.acceptance_rate = 1.0;
  if (auto add = std::dynamic_pointer_cast<const AdditiveEnsemble>(b.model)) return {sample_additive(*add, n, seed), diag};
  if (b.base) return {b.base->sample(n, seed), diag};
  throw InvalidInput("model cannot be sampled");
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg), hash_(config_hash(cfg.raw)) {}

  Json run_seed(std::uint64_t seed) {
    const std::string& task = cfg_.task;
    if (task == "synthetic-mog") return synthetic(seed);
    if (task == "weights-sweep") return sweep(seed);
    if (task == "sample") return sample(seed);
    if (task == "eval-classify") return classify(seed);
    return fit_and_eval(seed);
  }

  const std::string& hash() const { return hash_; }

 private:
  const DataMatrix& dataset(const std::optional<fs::path>& path, std::optional<DataMatrix>& cache) {
    if (!cache) cache = load_dataset(*path, cfg_.format);
    return *cache;
  }

  Built obtain_model(std::uint64_t seed, bool report_conditions) {
    if (cfg_.model) return load_built(*cfg_.model);
    return fit_model(cfg_, seed, dataset(cfg_.train, train_), report_conditions);
  }

  void write_rounds(const fs::path& dir, std::uint64_t seed, const std::string& method,
                    const std::vector<RoundRecord>& rounds) {
    for (const auto& r : rounds) {
      Json j = r.to_json();
      j["seed"] = seed;
      j["method"] = method;
      save_json(stamped(hash_, j), dir / ("round_" + std::to_string(r.t) + ".json"));
    }
  }

  void save_model(const Built& b, const LogZResult& z, const fs::path& dir, std::uint64_t seed) {
    Json mj = b.model->to_json();
    if (mj.value("type", std::string()) == "multiplicative_ensemble") {
      mj["log_z"] = {{"estimate", z.partition.estimate},
                     {"std_error", z.partition.std_error},
                     {"sample_size", z.partition.sample_size},
                     {"source", to_string(z.partition.source)}};
    }
    save_json(stamped(hash_, {{"seed", seed}, {"model", mj}}), dir / "model.json");
  }

  Json fit_and_eval(std::uint64_t seed) {
    const bool conditions = cfg_.task == "check-conditions" || cfg_.report_conditions;
    Built b = obtain_model(seed, conditions);
    const bool binary = train_ ? train_->all_binary() : (cfg_.format == DataFormat::kCsv01);
    const fs::path dir = seed_dir(cfg_, seed);
    Bounds2d bounds{-12, 12, -12, 12};
    if (cfg_.train && b.model->dim() == 2 && !binary) bounds = default_bounds(dataset(cfg_.train, train_));
    const LogZResult z = compute_log_z(b, cfg_.logz, bounds, binary, seed);

    Json rec = log_z_json(z);
    rec["rounds"] = rounds_json(b.rounds);
    write_rounds(dir, seed, cfg_.method, b.rounds);
    if (!cfg_.model) save_model(b, z, dir, seed);
    if (cfg_.train) rec["train_nll"] = avg_nll(*b.model, dataset(cfg_.train, train_), z.partition.estimate);
    if (cfg_.valid) rec["valid_nll"] = avg_nll(*b.model, dataset(cfg_.valid, valid_), z.partition.estimate);
    if (cfg_.test) rec["test_nll"] = avg_nll(*b.model, dataset(cfg_.test, test_), z.partition.estimate);
    if (cfg_.task == "check-conditions") {
      Json summary;
      for (const auto& r : b.rounds) {
        if (!r.conditions) continue;
        summary["round_" + std::to_string(r.t)] = {{"sufficient_margin", r.conditions->sufficient_margin()},
                                                   {"necessary_margin", r.conditions->necessary_margin()}};
      }
      rec["conditions"] = summary;
    }
    return rec;
  }

  Json classify(std::uint64_t seed) {
    Built b = obtain_model(seed, false);
    const fs::path dir = seed_dir(cfg_, seed);
    write_rounds(dir, seed, cfg_.method, b.rounds);
    const OneOutAccuracy acc = eval_one_out_accuracy(*b.model, dataset(cfg_.test, test_));
    Json rec{{"accuracy", acc.accuracy}, {"n_predictions", acc.n_predictions}, {"n_degenerate", acc.n_degenerate}};
    rec["rounds"] = rounds_json(b.rounds);
    return rec;
  }

  Json sample(std::uint64_t seed) {
    Built b = obtain_model(seed, false);
    const fs::path dir = seed_dir(cfg_, seed);
    MhResult draws = sample_built(b, cfg_.n_samples, cfg_, derive_seed(seed, kSampleStream));
    write_csv(draws.samples, dir / "samples.csv");
    Json rec{{"n_samples", draws.samples.rows()}, {"mh", draws.diagnostics.to_json()}};
    return rec;
  }

  struct SyntheticData {
    GaussianMixture target;
    DataMatrix train, test;
    Bounds2d bounds;
  };

  SyntheticData synthetic_data(std::uint64_t seed) const {
    const SyntheticConfig& s = cfg_.synthetic;
    GaussianMixture target = synthetic_mog_target(s.c);
    DataMatrix train = target.sample(s.n_train, derive_seed(seed, kTrainStream));
    DataMatrix test = target.sample(s.n_test, derive_seed(seed, kTestStream));
    const double r = s.c + 9.0;
    return {std::move(target), std::move(train), std::move(test), cfg_.logz.bounds.value_or(Bounds2d{-r, r, -r, r})};
  }

  double quadrature_log_z(const LogDensity& model, const Bounds2d& bounds) const {
    return grid_log_integral_2d(model, bounds, cfg_.logz.resolution);
  }

  BoostOptions synthetic_options(std::uint64_t seed, std::shared_ptr<const GenerativeModel> base) const {
    BoostOptions opts = boost_options(cfg_, seed, false);
    opts.base.family = ModelFamily::kGaussianMixture;
    opts.base.em.components = cfg_.synthetic.components;
    opts.base_model = std::move(base);
    return opts;
  }

  void export_grids(const std::string& name, const MultiplicativeEnsemble& ens, const Bounds2d& view) const {
    const fs::path dir = cfg_.output_dir / "grids";
    fs::create_directories(dir);
    for (std::size_t t = 0; t <= ens.rounds(); ++t) {
      export_density_grid(ens.prefix(t), view, cfg_.synthetic.grid_resolution,
                          dir / (name + "_t" + std::to_string(t) + ".csv"),
                          {{"config_hash", hash_}, {"method", name}, {"round", t}});
    }
  }

  Json synthetic(std::uint64_t seed) {
    const SyntheticConfig& s = cfg_.synthetic;
    SyntheticData sd = synthetic_data(seed);
    const fs::path dir = seed_dir(cfg_, seed);
    const bool grids = s.grid_resolution > 0 && seed == cfg_.seeds.front();
    const Bounds2d view{-s.c - 4, s.c + 4, -s.c - 4, s.c + 4};
    if (grids) {
      export_density_grid(sd.target, view, s.grid_resolution, cfg_.output_dir / "grid.csv",
                          {{"config_hash", hash_}, {"method", "target"}});
    }

    BaseSpec base_spec{ModelFamily::kGaussianMixture, cfg_.base.em};
    base_spec.em.components = s.components;
    auto base = fit_base(sd.train, base_spec, derive_seed(seed, 0));
    BoostOptions opts = synthetic_options(seed, base);
    EmConfig em = base_spec.em;

    Json methods;
    methods["target"] = {{"test_nll", avg_nll(sd.target, sd.test)}};
    for (const auto& name : s.methods) {
      Json m;
      std::vector<RoundRecord> rounds;
      if (name == "base") {
        m["test_nll"] = avg_nll(*base, sd.test);
        m["log_z"] = 0.0;
      } else if (name == "add") {
        AdditiveResult r = run_additive(sd.train, repeat_rounds(RoundSpec::generative(1.0, em), s.rounds), opts);
        m["test_nll"] = avg_nll(r.ensemble, sd.test);
        m["log_z"] = 0.0;
        rounds = r.rounds;
      } else {
        BoostOptions o = opts;
        std::vector<RoundSpec> specs;
        if (name == "genbgm") {
          o.heuristic = s.genbgm_heuristic;
          specs = repeat_rounds(RoundSpec::generative(s.beta, em), s.rounds);
        } else if (name == "discbgm_nce" || name == "discbgm_hd") {
          o.heuristic = s.disc_heuristic;
          const FDivergence f = name == "discbgm_nce" ? FDivergence::nce() : FDivergence::hellinger();
          specs = repeat_rounds(RoundSpec::discriminative(f, cfg_.train_defaults), s.rounds);
        } else {
          throw InvalidInput("unknown synthetic method '" + name + "'");
        }
        BoostResult r = run_hybrid(sd.train, specs, o);
        const double log_z = quadrature_log_z(r.ensemble, sd.bounds);
        m["test_nll"] = avg_nll(r.ensemble, sd.test, log_z);
        m["log_z"] = log_z;
        rounds = r.rounds;
        if (grids) export_grids(name, r.ensemble, view);
      }
      m["rounds"] = rounds_json(rounds);
      const fs::path mdir = dir / name;
      fs::create_directories(mdir);
      write_rounds(mdir, seed, name, rounds);
      methods[name] = m;
      spdlog::info("seed {} {}: test NLL {:.4f}", seed, name, m["test_nll"].get<double>());
    }
    return {{"methods", methods}};
  }

  Json sweep(std::uint64_t seed) {
    const SweepConfig& sw = cfg_.sweep;
    SyntheticData sd = synthetic_data(seed);
    BaseSpec base_spec{ModelFamily::kGaussianMixture, cfg_.base.em};
    base_spec.em.components = cfg_.synthetic.components;
    auto base = fit_base(sd.train, base_spec, derive_seed(seed, 0));
    BoostOptions opts = synthetic_options(seed, base);
    const double base_nll = avg_nll(*base, sd.test);
    const RoundSpec spec = RoundSpec::discriminative(sw.fdiv, cfg_.train_defaults);

    auto nll_of = [&](const MultiplicativeEnsemble& ens) {
      return avg_nll(ens, sd.test, quadrature_log_z(ens, sd.bounds));
    };
    std::vector<int> horizons = sw.horizons;
    if (horizons.empty()) {
      for (int T = 1; T <= sw.max_rounds; ++T) horizons.push_back(T);
    }
    const int longest = *std::max_element(horizons.begin(), horizons.end());
    Json out;
    for (WeightHeuristic h : sw.heuristics) {
      BoostOptions o = opts;
      o.heuristic = h;
      Json curve{{"T0", base_nll}};
      if (h == WeightHeuristic::kUniform) {
        // Every member's weight depends on T, so each horizon is its own run.
        for (int T : horizons) {
          curve["T" + std::to_string(T)] = nll_of(run_discbgm(sd.train, repeat_rounds(spec, T), o).ensemble);
        }
      } else {
        // Weights do not depend on T: prefixes of the longest run are the shorter runs.
        BoostResult r = run_discbgm(sd.train, repeat_rounds(spec, longest), o);
        for (int T : horizons) curve["T" + std::to_string(T)] = nll_of(r.ensemble.prefix(static_cast<std::size_t>(T)));
      }
      spdlog::info("seed {} {}: {}", seed, to_string(h), curve.dump());
      out[to_string(h)] = curve;
    }
    return {{"sweep", out}};
  }

  const ExperimentConfig& cfg_;
  std::string hash_;
  std::optional<DataMatrix> train_, valid_, test_;
};

void flatten(const Json& j, const std::string& prefix, std::map<std::string, double>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.key() == "seed") continue;
    if (it->is_object()) {
      flatten(*it, key, out);
    } else if (it->is_number()) {
      out[key] = it->get<double>();
    }
  }
}

}  // namespace

const std::vector<std::string>& experiment_tasks() {
  static const std::vector<std::string> tasks = {"fit",           "eval-nll",      "eval-classify",   "sample",
                                                 "synthetic-mog", "weights-sweep", "check-conditions"};
  return tasks;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  c.raw = j;
  try {
    if (!j.is_object()) throw InvalidInput("config must be a JSON object");
    c.task = j.at("task").get<std::string>();
    const auto& tasks = experiment_tasks();
    if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) {
      throw InvalidInput("unknown task '" + c.task + "'");
    }
    auto resolve = [&](const std::string& p) {
      fs::path path(p);
      if (path.is_relative()) path = base_dir / path;
      if (!fs::exists(path)) throw InvalidInput("referenced file does not exist: " + path.string());
      return path;
    };
    if (j.contains("data")) {
      const Json& d = j.at("data");
      c.format = data_format_from_name(d.value("format", std::string("csv01")));
      if (d.contains("train")) c.train = resolve(d.at("train").get<std::string>());
      if (d.contains("valid")) c.valid = resolve(d.at("valid").get<std::string>());
      if (d.contains("test")) c.test = resolve(d.at("test").get<std::string>());
    }
    if (j.contains("model")) c.model = resolve(j.at("model").get<std::string>());

    c.method = j.value("method", c.method);
    const std::vector<std::string> methods = {"base", "additive", "genbgm", "discbgm", "hybrid"};
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
      throw InvalidInput("unknown method '" + c.method + "'");
    }
    const Json base = j.value("base", Json::object());
    c.base.family = family_from_name(base.value("family", std::string(c.format == DataFormat::kCsv01 ? "mob" : "gmm")));
    c.base.em = parse_em(base, c.base.em);
    // The 2-D synthetic tasks train their classifiers at 1e-3; benchmarks keep 1e-4.
    if (c.task == "synthetic-mog" || c.task == "weights-sweep") c.train_defaults.learning_rate = 1e-3;
    c.train_defaults = parse_train(j.value("train", Json::object()), c.train_defaults);
    for (const auto& r : j.value("rounds", Json::array())) c.rounds.push_back(parse_round(r, c.base.em, c.train_defaults));
    c.heuristic = heuristic_from_name(j.value("heuristic", std::string("unity")));
    if (j.contains("mh")) {
      const bool binary = c.format == DataFormat::kCsv01 && c.task != "synthetic-mog" && c.task != "weights-sweep";
      c.mh = parse_mh(j.at("mh"), binary ? BoostOptions::binary_mh_preset() : BoostOptions::continuous_mh_preset());
    }
    c.negative_ratio = j.value("negative_ratio", c.negative_ratio);
    if (!(c.negative_ratio > 0.0)) throw InvalidInput("negative_ratio must be positive");
    c.report_conditions = j.value("report_conditions", c.report_conditions);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) throw InvalidInput("seeds must be nonempty");
    if (j.contains("logz")) {
      const Json& l = j.at("logz");
      c.logz.method = l.value("method", c.logz.method);
      const std::vector<std::string> lm = {"auto", "is", "enumerate", "quadrature"};
      if (std::find(lm.begin(), lm.end(), c.logz.method) == lm.end()) {
        throw InvalidInput("unknown logz method '" + c.logz.method + "'");
      }
      c.logz.n = l.value("n", c.logz.n);
      c.logz.resolution = l.value("resolution", c.logz.resolution);
      if (l.contains("bounds")) {
        const auto b = l.at("bounds").get<std::vector<double>>();
        if (b.size() != 4) throw InvalidInput("logz bounds must be [x_min, x_max, y_min, y_max]");
        c.logz.bounds = Bounds2d{b[0], b[1], b[2], b[3]};
      }
      if (c.logz.n < 1 || c.logz.resolution < 1) throw InvalidInput("logz n and resolution must be >= 1");
    }
    c.n_samples = j.value("n_samples", c.n_samples);
    if (j.contains("synthetic")) {
      const Json& s = j.at("synthetic");
      c.synthetic.c = s.value("c", c.synthetic.c);
      c.synthetic.n_train = s.value("n_train", c.synthetic.n_train);
      c.synthetic.n_test = s.value("n_test", c.synthetic.n_test);
      c.synthetic.rounds = s.value("rounds", c.synthetic.rounds);
      c.synthetic.components = s.value("components", c.synthetic.components);
      c.synthetic.beta = s.value("beta", c.synthetic.beta);
      if (s.contains("genbgm_heuristic")) c.synthetic.genbgm_heuristic = heuristic_from_name(s.at("genbgm_heuristic"));
      if (s.contains("disc_heuristic")) c.synthetic.disc_heuristic = heuristic_from_name(s.at("disc_heuristic"));
      c.synthetic.methods = s.value("methods", c.synthetic.methods);
      c.synthetic.grid_resolution = s.value("grid_resolution", c.synthetic.grid_resolution);
      if (c.synthetic.rounds < 0 || c.synthetic.n_train < 2 || c.synthetic.n_test < 1) {
        throw InvalidInput("invalid synthetic settings");
      }
    }
    if (j.contains("sweep")) {
      const Json& s = j.at("sweep");
      if (s.contains("heuristics")) {
        c.sweep.heuristics.clear();
        for (const auto& h : s.at("heuristics")) c.sweep.heuristics.push_back(heuristic_from_name(h.get<std::string>()));
      }
      c.sweep.max_rounds = s.value("max_rounds", c.sweep.max_rounds);
      c.sweep.horizons = s.value("horizons", c.sweep.horizons);
      for (int T : c.sweep.horizons) {
        if (T < 1) throw InvalidInput("sweep horizons must be >= 1");
      }
      if (s.contains("fdiv")) c.sweep.fdiv = FDivergence::from_name(s.at("fdiv").get<std::string>());
      if (c.sweep.max_rounds < 1) throw InvalidInput("sweep max_rounds must be >= 1");
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();

    const bool needs_model = c.task == "fit" || c.task == "eval-nll" || c.task == "eval-classify" ||
                             c.task == "sample" || c.task == "check-conditions";
    if (needs_model && !c.model && !c.train) throw InvalidInput("task '" + c.task + "' needs data.train or model");
    if (c.task == "check-conditions" && !c.train) throw InvalidInput("check-conditions needs data.train");
    if ((c.task == "eval-nll" || c.task == "eval-classify") && !c.test) {
      throw InvalidInput("task '" + c.task + "' needs data.test");
    }
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("malformed config: ") + e.what());
  }
  return c;
}

std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json aggregate_per_seed(const Json& per_seed) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& rec : per_seed) {
    if (rec.value("status", std::string()) != "ok") continue;
    std::map<std::string, double> flat;
    flatten(rec, "", flat);
    for (const auto& [k, v] : flat) values[k].push_back(v);
  }
  Json agg = Json::object();
  for (const auto& [k, v] : values) {
    const auto n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double se = 0.0;
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      se = std::sqrt(ss / (n - 1.0) / n);
    }
    agg[k] = {{"mean", mean}, {"stderr", se}, {"n", v.size()}};
  }
  return agg;
}

GaussianMixture synthetic_mog_target(double c) {
  std::vector<Eigen::VectorXd> means;
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) means.push_back(Eigen::Vector2d(sx * c, sy * c));
  }
  return GaussianMixture(std::vector<double>(4, 0.25), std::move(means),
                         std::vector<Eigen::MatrixXd>(4, Eigen::MatrixXd::Identity(2, 2)));
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  Runner runner(cfg);
  Json per_seed = Json::array();
  Json timing = Json::object();
  std::size_t failures = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed : cfg.seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    Json rec;
    try {
      rec = runner.run_seed(seed);
      rec["status"] = "ok";
    } catch (const std::exception& e) {
      spdlog::error("seed {} failed: {}", seed, e.what());
      rec = {{"status", "failed"}, {"error", e.what()}};
      ++failures;
    }
    rec["seed"] = seed;
    per_seed.push_back(rec);
    timing[std::to_string(seed)] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  ExperimentOutcome outcome;
  outcome.metrics = {{"schema_version", kMetricsSchemaVersion},
                     {"config_hash", runner.hash()},
                     {"task", cfg.task},
                     {"seeds", cfg.seeds},
                     {"per_seed", per_seed},
                     {"aggregate", aggregate_per_seed(per_seed)},
                     {"n_failed", failures}};
  save_json(outcome.metrics, cfg.output_dir / "metrics.json");
  save_json({{"config_hash", runner.hash()},
             {"per_seed_seconds", timing},
             {"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}},
            cfg.output_dir / "timing.json");
  outcome.exit_code = failures == cfg.seeds.size() ? 2 : 0;
  return outcome;
}

}  // namespace bgm
