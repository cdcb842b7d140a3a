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

// ivgp: train, predict, evaluate and tabulate sparse GP models from the
// command line. See docs/config.md for the config and file formats.
//
// Exit codes: 0 success, 2 config or usage error, 3 data error,
// 4 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ivgp/errors.hpp"
#include "ivgp/io.hpp"

namespace {

using namespace ivgp;
using io::Json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(const Error &e) {
  if (e.is_numerical()) return kExitNumerical;
  if (e.code() == ErrorCode::DataError) return kExitData;
  return kExitConfig;
}

// Adds the likelihood's observation noise to f's predictive covariance.
void add_observation_noise(PosteriorMoments &pm, const Likelihood &lik) {
  const Eigen::Index N = pm.num_points(), P = pm.num_outputs();
  Eigen::MatrixXd noise;
  if (lik.kind() == Likelihood::Kind::Gaussian) {
    noise = lik.variance() * Eigen::MatrixXd::Identity(P, P);
  } else if (lik.kind() == Likelihood::Kind::CorrelatedGaussian) {
    noise = lik.covariance();
    if (!pm.full_output_cov)
      noise = Eigen::MatrixXd(noise.diagonal().asDiagonal());
  } else {
    if (pm.full_cov || pm.full_output_cov)
      throw Error(ErrorCode::UnsupportedMode,
                  "observation noise for non-Gaussian likelihoods needs the marginal mode");
    auto [mean, var] = lik.predict_observation_moments(pm.mean, pm.cov);
    pm.mean = mean;
    pm.cov = var;
    return;
  }
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index p = 0; p < P; ++p)
      for (Eigen::Index q = 0; q < P; ++q) {
        if (!pm.full_output_cov && p != q) continue;
        const double s = noise(p, q);
        if (pm.full_cov && pm.full_output_cov) pm.cov(n, p, n, q) += s;
        else if (pm.full_cov) pm.cov(p, n, n) += s;
        else if (pm.full_output_cov) pm.cov(n, p, q) += s;
        else pm.cov(n, p) += s;
      }
}

std::string predictions_csv(const PosteriorMoments &pm) {
  const Eigen::Index N = pm.num_points(), P = pm.num_outputs();
  std::ostringstream out;
  std::vector<std::string> cols;
  for (Eigen::Index p = 0; p < P; ++p) cols.push_back("mu" + std::to_string(p));
  const bool output_cov = pm.full_output_cov && !pm.full_cov;
  for (Eigen::Index p = 0; p < P; ++p) {
    if (output_cov)
      for (Eigen::Index q = 0; q < P; ++q) cols.push_back("cov" + std::to_string(p) + "_" + std::to_string(q));
    else
      cols.push_back("var" + std::to_string(p));
  }
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
  const Eigen::MatrixXd var = pm.marginal_variance();
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index p = 0; p < P; ++p) out << (p ? "," : "") << io::format_double(pm.mean(n, p));
    for (Eigen::Index p = 0; p < P; ++p) {
      if (output_cov)
        for (Eigen::Index q = 0; q < P; ++q) out << "," << io::format_double(pm.cov(n, p, q));
      else
        out << "," << io::format_double(var(n, p));
    }
    out << "\n";
  }
  return out.str();
}

std::vector<double> parse_grid(const std::string &spec, Eigen::Index &steps) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 3) throw Error(ErrorCode::ParseError, "grid must be min:max:steps, got " + spec);
  double lo = 0, hi = 0;
  try {
    lo = std::stod(parts[0]);
    hi = std::stod(parts[1]);
    steps = std::stol(parts[2]);
  } catch (const std::exception &) {
    throw Error(ErrorCode::ParseError, "grid must be min:max:steps, got " + spec);
  }
  if (steps < 1 || !(hi >= lo)) throw Error(ErrorCode::ParseError, "grid needs steps >= 1 and max >= min");
  std::vector<double> out;
  for (Eigen::Index i = 0; i < steps; ++i)
    out.push_back(steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1));
  return out;
}

void emit(const std::string &path, const std::string &text) {
  if (path.empty() || path == "-") std::cout << text;
  else io::write_file(path, text);
}

int cmd_train(const std::string &config_path, const std::string &data_path, const std::string &out,
              std::string trace_path) {
  const Json config = io::read_config(config_path);
  const io::TrainSettings settings = io::training_settings(config);
  const io::Dataset data = io::read_dataset(data_path);
  io::ModelBundle model = io::build_model(config, data);
  const auto trace = io::train(model, data, settings);
  io::save_model(model, out);
  if (trace_path.empty()) trace_path = out + ".trace.jsonl";
  std::string lines;
  for (const auto &r : trace) {
    lines += io::trace_line(r) + "\n";
    if (!r.warning.empty()) std::cerr << "warning: step " << r.step << ": " << r.warning << "\n";
  }
  io::write_file(trace_path, lines);
  return 0;
}

int cmd_predict(const std::string &model_path, const std::string &data_path, const std::string &out, bool full_cov,
                bool full_output_cov, bool observation_noise, std::uint64_t seed) {
  io::ModelBundle model = io::load_model(model_path);
  const io::Dataset data = io::read_dataset(data_path, false);
  PosteriorMoments pm = io::predict_f(model, data.X, full_cov, full_output_cov, seed);
  if (observation_noise) add_observation_noise(pm, model.likelihood());
  emit(out, predictions_csv(pm));
  if (full_cov) {
    const std::string cov_path = (out.empty() || out == "-") ? "predict.cov" : out + ".cov";
    io::write_file(cov_path, io::format_tensor(pm.cov));
  }
  return 0;
}

int cmd_eval(const std::string &model_path, const std::string &data_path, const std::string &out,
             std::uint64_t seed) {
  io::ModelBundle model = io::load_model(model_path);
  const io::Dataset data = io::read_dataset(data_path);
  const Eigen::VectorXd lpd = io::log_predictive(model, data, seed);
  const Likelihood lik = model.likelihood();
  const PosteriorMoments f = io::predict_f(model, data.X, false, false, seed);
  PosteriorMoments pm = f;
  if (lik.kind() == Likelihood::Kind::Bernoulli || lik.kind() == Likelihood::Kind::Poisson) {
    pm.mean = lik.predict_observation_moments(pm.mean, pm.cov).first;
  }
  const Eigen::Index P = model.num_outputs();
  std::vector<double> sq(static_cast<std::size_t>(P), 0.0), lp(static_cast<std::size_t>(P), 0.0);
  std::vector<Eigen::Index> count(static_cast<std::size_t>(P), 0);
  double sq_total = 0.0;
  Eigen::Index n_total = 0;
  for (Eigen::Index n = 0; n < data.X.rows(); ++n) {
    std::vector<std::pair<Eigen::Index, double>> obs;
    if (data.heterotopic()) obs.emplace_back(data.output_index[static_cast<std::size_t>(n)], data.Y(n, 0));
    else
      for (Eigen::Index p = 0; p < P; ++p) obs.emplace_back(p, data.Y(n, p));
    for (const auto &[p, y] : obs) {
      const double e = y - pm.mean(n, p);
      sq[static_cast<std::size_t>(p)] += e * e;
      sq_total += e * e;
      ++n_total;
      ++count[static_cast<std::size_t>(p)];
    }
    if (data.heterotopic()) lp[static_cast<std::size_t>(obs[0].first)] += lpd(n);
  }
  Json per_output = Json::array();
  for (Eigen::Index p = 0; p < P; ++p) {
    const auto k = static_cast<std::size_t>(p);
    Json entry = {{"output", p}, {"count", count[k]},
                  {"rmse", count[k] ? std::sqrt(sq[k] / static_cast<double>(count[k])) : 0.0}};
    if (data.heterotopic()) entry["mlpd"] = count[k] ? lp[k] / static_cast<double>(count[k]) : 0.0;
    per_output.push_back(entry);
  }
  if (!data.heterotopic() && !lik.output_correlated() && P > 1 && !model.dgp) {
    // Factorized likelihoods: score each output column on its own.
    for (Eigen::Index p = 0; p < P; ++p) {
      const Eigen::MatrixXd y = data.Y.col(p);
      Tensor v({data.X.rows(), 1});
      const Eigen::MatrixXd var = f.marginal_variance();
      for (Eigen::Index n = 0; n < data.X.rows(); ++n) v(n, 0) = var(n, p);
      per_output[static_cast<std::size_t>(p)]["mlpd"] =
          lik.predict_log_density(f.mean.col(p), v, y).mean();
    }
  } else if (!data.heterotopic() && P == 1) {
    per_output[0]["mlpd"] = lpd.mean();
  }
  Json metrics = {{"mlpd", lpd.mean()},
                  {"rmse", std::sqrt(sq_total / static_cast<double>(std::max<Eigen::Index>(n_total, 1)))},
                  {"n", data.X.rows()},
                  {"per_output", per_output}};
  emit(out, metrics.dump(2) + "\n");
  return 0;
}

int cmd_plotdata(const std::string &model_path, const std::vector<std::string> &grids, const std::string &out,
                 bool observation_noise, std::uint64_t seed) {
  io::ModelBundle model = io::load_model(model_path);
  if (grids.empty() || grids.size() > 2)
    throw Error(ErrorCode::ParseError, "plotdata takes one --grid per input dimension, at most two");
  if (static_cast<Eigen::Index>(grids.size()) != model.input_dim)
    throw Error(ErrorCode::DataError, "model has " + std::to_string(model.input_dim) + " inputs, " +
                                          std::to_string(grids.size()) + " grids given");
  std::vector<std::vector<double>> axes;
  Eigen::Index total = 1;
  for (const auto &g : grids) {
    Eigen::Index steps = 0;
    axes.push_back(parse_grid(g, steps));
    total *= steps;
  }
  Eigen::MatrixXd X(total, static_cast<Eigen::Index>(axes.size()));
  for (Eigen::Index i = 0; i < total; ++i) {
    Eigen::Index rest = i;
    for (std::size_t d = axes.size(); d-- > 0;) {
      const auto len = static_cast<Eigen::Index>(axes[d].size());
      X(i, static_cast<Eigen::Index>(d)) = axes[d][static_cast<std::size_t>(rest % len)];
      rest /= len;
    }
  }
  PosteriorMoments pm = io::predict_f(model, X, false, false, seed);
  if (observation_noise) add_observation_noise(pm, model.likelihood());
  const Eigen::MatrixXd var = pm.marginal_variance();
  std::ostringstream s;
  for (Eigen::Index d = 0; d < X.cols(); ++d) s << (d ? "," : "") << "x" << d;
  for (Eigen::Index p = 0; p < pm.num_outputs(); ++p)
    s << ",mu" << p << ",var" << p << ",lower" << p << ",upper" << p;
  s << "\n";
  for (Eigen::Index i = 0; i < total; ++i) {
    for (Eigen::Index d = 0; d < X.cols(); ++d) s << (d ? "," : "") << io::format_double(X(i, d));
    for (Eigen::Index p = 0; p < pm.num_outputs(); ++p) {
      const double m = pm.mean(i, p), v = var(i, p), w = 2.0 * std::sqrt(std::max(v, 0.0));
      s << "," << io::format_double(m) << "," << io::format_double(v) << "," << io::format_double(m - w) << ","
        << io::format_double(m + w);
    }
    s << "\n";
  }
  emit(out, s.str());
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sparse variational Gaussian process models"};
  app.require_subcommand(1);

  std::string config, data, out, trace, model;
  bool full_cov = false, full_output_cov = false, observation_noise = false;
  std::uint64_t seed = 0;
  std::vector<std::string> grids;

  auto *train = app.add_subcommand("train", "Fit a model described by a config file");
  train->add_option("-c,--config", config, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("-d,--data", data, "Training data (CSV)")->required();
  train->add_option("-o,--out", out, "Model file to write")->required();
  train->add_option("--trace", trace, "Trace file (default: <out>.trace.jsonl)");

  auto *predict = app.add_subcommand("predict", "Predict at the inputs of a data file");
  predict->add_option("-m,--model", model, "Model file")->required();
  predict->add_option("-d,--data", data, "Inputs (CSV; output columns are ignored)")->required();
  predict->add_option("-o,--out", out, "Predictions file, '-' for stdout")->default_val("-");
  predict->add_flag("--full-cov", full_cov, "Covariance across inputs (written to <out>.cov)");
  predict->add_flag("--full-output-cov", full_output_cov, "Covariance across outputs");
  predict->add_flag("--observation-noise", observation_noise, "Include the likelihood noise");
  predict->add_option("--seed", seed, "Seed for sampled deep GP predictions");

  auto *eval = app.add_subcommand("eval", "Score a model on held-out data");
  eval->add_option("-m,--model", model, "Model file")->required();
  eval->add_option("-d,--data", data, "Held-out data (CSV)")->required();
  eval->add_option("-o,--out", out, "Metrics file, '-' for stdout")->default_val("-");
  eval->add_option("--seed", seed, "Seed for sampled deep GP predictions");

  auto *plot = app.add_subcommand("plotdata", "Tabulate the posterior on a grid");
  plot->add_option("-m,--model", model, "Model file")->required();
  plot->add_option("--grid", grids, "min:max:steps, once per input dimension")->required();
  plot->add_option("-o,--out", out, "Grid file, '-' for stdout")->default_val("-");
  plot->add_flag("--observation-noise", observation_noise, "Include the likelihood noise");
  plot->add_option("--seed", seed, "Seed for sampled deep GP predictions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(config, data, out, trace);
    if (*predict) return cmd_predict(model, data, out, full_cov, full_output_cov, observation_noise, seed);
    if (*eval) return cmd_eval(model, data, out, seed);
    if (*plot) return cmd_plotdata(model, grids, out, observation_noise, seed);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const nlohmann::json::exception &e) {
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
