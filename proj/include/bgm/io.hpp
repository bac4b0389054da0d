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

#ifndef BGM_IO_HPP
#define BGM_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

#include "bgm/core.hpp"
#include "bgm/oracles.hpp"

namespace bgm {

enum class DataFormat { kCsv01, kCsvReal };

DataFormat data_format_from_name(const std::string& name);

/// Comma-separated rows, one example per line, no header. Blank lines are skipped.
DataMatrix parse_dataset(std::istream& in, DataFormat format);
DataMatrix load_dataset(const std::filesystem::path& path, DataFormat format);
/// Same column order as the input; binary columns are written as 0/1.
void write_csv(const DataMatrix& data, const std::filesystem::path& path);

Json load_json(const std::filesystem::path& path);
void save_json(const Json& j, const std::filesystem::path& path);

/// Rebuilds any serialized model, including nested ensembles.
std::shared_ptr<const LogDensity> model_from_json(const Json& j);
std::shared_ptr<const LogDensity> load_model(const std::filesystem::path& path);

/// Writes x,y,log_unnorm_density over the grid's cell midpoints and a sidecar
/// <path>.json holding the grid-quadrature log Z. Returns that log Z.
double export_density_grid(const LogDensity& model, const Bounds2d& bounds, int resolution,
                           const std::filesystem::path& path, const Json& extra = Json::object());

}  // namespace bgm

#endif
