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

#include "bgm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "bgm/errors.hpp"
#include "bgm/mixtures.hpp"
#include "bgm/mlp.hpp"
#include "bgm/numeric.hpp"

namespace bgm {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_token(std::string_view token, DataFormat format, std::size_t line) {
  if (format == DataFormat::kCsv01) {
    if (token == "0") return 0.0;
    if (token == "1") return 1.0;
    throw ParseError(line, "expected 0 or 1, got '" + std::string(token) + "'");
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw ParseError(line, "not a finite number: '" + std::string(token) + "'");
  }
  return v;
}

std::vector<double> log_values_from_json(const Json& values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.is_null() ? kNegInf : v.get<double>());
  return out;
}

}  // namespace

DataFormat data_format_from_name(const std::string& name) {
  if (name == "csv01") return DataFormat::kCsv01;
  if (name == "csv_real") return DataFormat::kCsvReal;
  throw InvalidInput("unknown data format '" + name + "' (expected csv01 or csv_real)");
}

DataMatrix parse_dataset(std::istream& in, DataFormat format) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (trim(line).empty()) continue;
    std::size_t count = 0;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      values.push_back(parse_token(trim(rest.substr(0, comma)), format, line_no));
      ++count;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ParseError(line_no, "row has " + std::to_string(count) + " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(0, "dataset is empty");
  RowMatrix m = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  return format == DataFormat::kCsv01 ? DataMatrix::binary(std::move(m)) : DataMatrix::real(std::move(m));
}

DataMatrix load_dataset(const std::filesystem::path& path, DataFormat format) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open dataset " + path.string());
  DataMatrix data = parse_dataset(in, format);
  spdlog::info("loaded {}: {} rows x {} columns", path.string(), data.rows(), data.cols());
  return data;
}

void write_csv(const DataMatrix& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  char buf[32];
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const Point row = data.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out << ',';
      if (data.column_kinds()[j] == ColumnKind::kBinary) {
        out << (row[j] == 1.0 ? '1' : '0');
      } else {
        const auto res = std::to_chars(buf, buf + sizeof(buf), row[j]);
        out.write(buf, res.ptr - buf);
      }
    }
    out << '\n';
  }
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

void save_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::shared_ptr<const LogDensity> model_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian_mixture") return std::make_shared<GaussianMixture>(GaussianMixture::from_json(j));
  if (type == "bernoulli_mixture") return std::make_shared<BernoulliMixture>(BernoulliMixture::from_json(j));
  if (type == "density_ratio") return std::make_shared<DensityRatioModel>(DensityRatioModel::from_json(j));
  if (type == "tabular_density") {
    return std::make_shared<TabularDensity>(j.at("d").get<int>(), j.at("probs").get<std::vector<double>>());
  }
  if (type == "table_function") {
    return std::make_shared<TableFunction>(j.at("d").get<int>(), log_values_from_json(j.at("log_values")));
  }
  if (type == "multiplicative_ensemble") {
    const auto& members = j.at("members");
    if (members.empty()) throw InvalidInput("ensemble has no members");
    auto member = [](const Json& mj) {
      const auto kind = mj.at("kind").get<std::string>() == "discriminator" ? MemberKind::kDiscriminator
                                                                           : MemberKind::kGenerator;
      return EnsembleMember{model_from_json(mj.at("learner")), mj.at("alpha").get<double>(), kind};
    };
    auto ens = std::make_shared<MultiplicativeEnsemble>(member(members.front()));
    for (std::size_t i = 1; i < members.size(); ++i) ens->append(member(members[i]));
    if (j.contains("log_z")) {
      const auto& z = j.at("log_z");
      const std::string source = z.at("source").get<std::string>();
      LogPartition lp;
      lp.estimate = z.at("estimate").get<double>();
      lp.std_error = z.at("std_error").get<double>();
      lp.sample_size = z.at("sample_size").get<std::size_t>();
      lp.source = source == "enumeration"  ? LogZSource::kEnumeration
                  : source == "quadrature" ? LogZSource::kQuadrature
                                           : LogZSource::kImportanceSampling;
      ens->set_log_z(lp);
    }
    return ens;
  }
  if (type == "additive_ensemble") {
    std::vector<AdditiveMember> members;
    for (const auto& mj : j.at("members")) {
      members.push_back({model_from_json(mj.at("learner")), mj.at("alpha_hat").get<double>()});
    }
    return std::make_shared<AdditiveEnsemble>(std::move(members));
  }
  throw InvalidInput("unknown model type '" + type + "'");
}

std::shared_ptr<const LogDensity> load_model(const std::filesystem::path& path) {
  const Json j = load_json(path);
  return model_from_json(j.contains("model") ? j.at("model") : j);
}

double export_density_grid(const LogDensity& model, const Bounds2d& bounds, int resolution,
                           const std::filesystem::path& path, const Json& extra) {
  if (model.dim() != 2) throw InvalidInput("density grids need a 2-D model");
  if (resolution < 1) throw InvalidInput("resolution must be >= 1");
  const double hx = (bounds.x_max - bounds.x_min) / resolution;
  const double hy = (bounds.y_max - bounds.y_min) / resolution;
  RowMatrix grid(static_cast<Eigen::Index>(resolution) * resolution, 2);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const auto r = static_cast<Eigen::Index>(i) * resolution + j;
      grid(r, 0) = bounds.x_min + (i + 0.5) * hx;
      grid(r, 1) = bounds.y_min + (j + 0.5) * hy;
    }
  }
  const DataMatrix points = DataMatrix::real(std::move(grid));
  const auto logs = model.log_density_batch(points);
  const double log_z = log_sum_exp(logs) + std::log(hx * hy);

  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << "x,y,log_unnorm_density\n";
  char buf[32];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, res.ptr - buf);
  };
  for (std::size_t r = 0; r < points.rows(); ++r) {
    put(points.row(r)[0]);
    out << ',';
    put(points.row(r)[1]);
    out << ',';
    if (std::isfinite(logs[r])) {
      put(logs[r]);
    } else {
      out << "-inf";
    }
    out << '\n';
  }

  Json side = extra;
  side["log_z"] = log_z;
  side["log_z_method"] = "quadrature";
  side["resolution"] = resolution;
  side["cell_area"] = hx * hy;
  side["bounds"] = {{"x_min", bounds.x_min}, {"x_max", bounds.x_max}, {"y_min", bounds.y_min}, {"y_max", bounds.y_max}};
  std::filesystem::path sidecar = path;
  sidecar += ".json";
  save_json(side, sidecar);
  return log_z;
}

}  // namespace bgm
