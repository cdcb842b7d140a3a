// Copyright 2026 The ivgp Authors
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

#ifndef IVGP_IO_HPP_
#define IVGP_IO_HPP_

#include <Eigen/Core>

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "ivgp/models.hpp"
#include "ivgp/training.hpp"

namespace ivgp::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/*
 * Config text to a JSON object. Grammar:
 *   entries := (key '=' value | key '{' entries '}')*, separated by
 *              newlines, ',' or ';'
 *   value   := number | "string" | word | word '{' entries '}' | '[' values ']'
 * `word { ... }` becomes an object with "type": word. `true`/`false` are
 * booleans, any other bare word a string. '#' starts a comment. Repeated
 * keys in one block throw ParseError.
 */
Json parse_config(const std::string &text);
Json read_config(const std::string &path);

struct Dataset {
  Eigen::MatrixXd X;
  // N x P, or N x 1 observed values in heterotopic mode.
  Eigen::MatrixXd Y;
  std::vector<Eigen::Index> output_index;
  bool heterotopic() const { return !output_index.empty(); }
  Eigen::Index num_outputs() const;
};

// Comma-separated with a header x0..x{D-1}, then y0..y{P-1} or y0 plus an
// output_index column. Throws DataError.
Dataset parse_dataset(const std::string &text, bool require_outputs = true);
Dataset read_dataset(const std::string &path, bool require_outputs = true);

// A trained or freshly built model of one of the four kinds.
struct ModelBundle {
  std::string kind; // gpr | svgp | dgp | svgp+uncertain
  Eigen::Index input_dim = 0;
  std::optional<GPRModel> gpr;
  std::optional<SVGPModel> svgp;
  std::optional<DGPModel> dgp;
  std::optional<UncertainSVGPModel> uncertain;
  // Metadata of the last training run (seed, steps, ...).
  Json training = Json::object();

  Eigen::Index num_outputs() const;
  Likelihood likelihood() const;
  void visit_params(ParamVisitor &visitor);
};

// Model described by a config, with data-driven initial values.
ModelBundle build_model(const Json &config, const Dataset &data);

Json model_to_json(ModelBundle &model);
ModelBundle model_from_json(const Json &j);
std::string dump_model(ModelBundle &model);
void save_model(ModelBundle &model, const std::string &path);
ModelBundle load_model(const std::string &path);

struct TrainSettings {
  FitConfig fit;
  std::vector<std::string> freeze;
};
TrainSettings training_settings(const Json &config);

// Trains in place; the problem holds references into `model` and `data`.
std::vector<TraceRecord> train(ModelBundle &model, const Dataset &data,
                               const TrainSettings &settings);

// Posterior of f. Deep models return the moment-matched mixture over
// `samples` propagated samples and support the marginal mode only.
PosteriorMoments predict_f(const ModelBundle &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                           bool full_cov, bool full_output_cov, std::uint64_t seed = 0,
                           Eigen::Index samples = 100);

// log p(y_n | data) per row; rows of heterotopic data score their own output.
Eigen::VectorXd log_predictive(const ModelBundle &model, const Dataset &data,
                               std::uint64_t seed = 0, Eigen::Index samples = 100);

std::string format_double(double x);
std::string trace_line(const TraceRecord &r);
// Shape header line followed by the values in row-major order, one
// trailing-dimension row per line.
std::string format_tensor(const Tensor &t);
Tensor parse_tensor(const std::string &text);

std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &text);

} // namespace ivgp::io

#endif // IVGP_IO_HPP_
