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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ivgp/io.hpp"

namespace {

namespace fs = std::filesystem;
using ivgp::io::Json;

const std::string kRoot = IVGP_SOURCE_DIR;
const std::string kCli = IVGP_CLI_PATH;

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ivgp_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string &name) const { return (dir_ / name).string(); }

  int run(const std::string &args) {
    const std::string cmd = kCli + " " + args + " > " + path("stdout") + " 2> " + path("stderr");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string stderr_text() const { return ivgp::io::read_file(path("stderr")); }

  std::string write(const std::string &name, const std::string &text) {
    ivgp::io::write_file(path(name), text);
    return path(name);
  }

  std::string train_desk(const std::string &cfg = "svgp_desk.cfg") {
    EXPECT_EQ(run("train -c " + kRoot + "/configs/" + cfg + " -d " + kRoot + "/data/desk30.csv -o " + path("m.json")), 0)
        << stderr_text();
    return path("m.json");
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> read_csv(const std::string &text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(Cli, TrainWritesLoadableModelAndTrace) {
  const std::string m = train_desk();
  EXPECT_NO_THROW(ivgp::io::load_model(m));
  std::ifstream trace(m + ".trace.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(trace, line)) {
    const Json r = Json::parse(line);
    EXPECT_EQ(r["step"], n);
    EXPECT_TRUE(r.contains("elbo") && r.contains("wall_ms"));
    ++n;
  }
  EXPECT_EQ(n, 500);
}

TEST_F(Cli, SameInputsGiveIdenticalModelFiles) {
  const std::string a = train_desk();
  const std::string first = ivgp::io::read_file(a);
  train_desk();
  EXPECT_EQ(ivgp::io::read_file(a), first);
}

TEST_F(Cli, ExitCodes) {
  const std::string cfg = kRoot + "/configs/svgp_desk.cfg", data = kRoot + "/data/desk30.csv";
  EXPECT_EQ(run("train -c " + cfg + " -d " + write("bad.csv", "x0,q0\n1,2\n") + " -o " + path("m.json")), 3);
  EXPECT_NE(stderr_text().find("DataError"), std::string::npos) << stderr_text();
  EXPECT_EQ(run("train -c " + write("bad.cfg", "model = svgp\nmodel = gpr\n") + " -d " + data + " -o " + path("m.json")), 2);
  EXPECT_EQ(run("train -c " + cfg + " -c " + cfg + " -d " + data + " -o " + path("m.json")), 2);
  EXPECT_EQ(run("train -d " + data + " -o " + path("m.json")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  const std::string overflow = write("lin.cfg", "model = gpr\nkernel = linear { variance = 1.0 }\n"
                                                "likelihood = gaussian { variance = 0.1 }\ntraining { steps = 1 }\n");
  EXPECT_EQ(run("train -c " + overflow + " -d " + write("big.csv", "x0,y0\n1e200,1\n2e200,2\n") + " -o " + path("s.json")), 4)
      << stderr_text();
  EXPECT_NE(stderr_text().find("NotPositiveDefinite"), std::string::npos) << stderr_text();
}

TEST_F(Cli, PredictDimensionMismatchIsExit3) {
  const std::string m = train_desk();
  EXPECT_EQ(run("predict -m " + m + " -d " + write("x2.csv", "x0,x1\n1,2\n")), 3);
}

TEST_F(Cli, ObservationNoiseAddsNoiseVariance) {
  const std::string m = train_desk();
  const std::string data = kRoot + "/data/desk30_holdout.csv";
  ASSERT_EQ(run("predict -m " + m + " -d " + data + " -o " + path("f.csv")), 0);
  ASSERT_EQ(run("predict -m " + m + " -d " + data + " --observation-noise -o " + path("y.csv")), 0);
  const auto f = read_csv(ivgp::io::read_file(path("f.csv"))), y = read_csv(ivgp::io::read_file(path("y.csv")));
  ASSERT_EQ(f[0], (std::vector<std::string>{"mu0", "var0"}));
  const double noise = ivgp::io::load_model(m).likelihood().variance();
  for (std::size_t r = 1; r < f.size(); ++r) {
    EXPECT_EQ(f[r][0], y[r][0]);
    EXPECT_NEAR(std::stod(y[r][1]) - std::stod(f[r][1]), noise, 1e-12);
  }
}

TEST_F(Cli, FullCovarianceTensorHeaders) {
  const std::string m = train_desk(), data = write("x.csv", "x0\n0\n0.5\n1\n");
  ASSERT_EQ(run("predict -m " + m + " -d " + data + " --full-cov -o " + path("p.csv")), 0);
  EXPECT_EQ(ivgp::io::parse_tensor(ivgp::io::read_file(path("p.csv.cov"))).shape(), (ivgp::Tensor::Shape{1, 3, 3}));
  ASSERT_EQ(run("predict -m " + m + " -d " + data + " --full-cov --full-output-cov -o " + path("q.csv")), 0);
  EXPECT_EQ(ivgp::io::read_file(path("q.csv.cov")).substr(0, 16), "# shape 3 1 3 1\n");
  ASSERT_EQ(run("predict -m " + m + " -d " + data + " --full-output-cov -o " + path("r.csv")), 0);
  EXPECT_EQ(read_csv(ivgp::io::read_file(path("r.csv")))[0], (std::vector<std::string>{"mu0", "cov0_0"}));
}

TEST_F(Cli, NearNoiselessGprReproducesTargets) {
  const std::string data = kRoot + "/data/desk30_holdout.csv";
  ASSERT_EQ(run("train -c " + kRoot + "/configs/gpr_desk.cfg -d " + data + " -o " + path("g.json")), 0) << stderr_text();
  ASSERT_EQ(run("predict -m " + path("g.json") + " -d " + data + " -o " + path("p.csv")), 0);
  const auto p = read_csv(ivgp::io::read_file(path("p.csv")));
  const ivgp::io::Dataset d = ivgp::io::read_dataset(data);
  for (Eigen::Index n = 0; n < d.Y.rows(); ++n) EXPECT_NEAR(std::stod(p[static_cast<std::size_t>(n) + 1][0]), d.Y(n, 0), 0.05);
}

TEST_F(Cli, EvalReportsMetrics) {
  const std::string cfg = write("g.cfg", "model = gpr\nkernel = sqexp { variance = 1.0, lengthscales = 0.3 }\n"
                                         "likelihood = gaussian { variance = 0.5 }\ntraining { steps = 0 }\n");
  const std::string one = write("one.csv", "x0,y0\n0,1\n");
  ASSERT_EQ(run("train -c " + cfg + " -d " + one + " -o " + path("g.json")), 0) << stderr_text();
  ASSERT_EQ(run("eval -m " + path("g.json") + " -d " + write("q.csv", "x0,y0\n0,0\n")), 0);
  const Json r = Json::parse(ivgp::io::read_file(path("stdout")));
  // Posterior at the training input: mean 1/1.5, variance 1 - 1/1.5; plus noise.
  const double mu = 1.0 / 1.5, v = 1.0 - 1.0 / 1.5 + 0.5;
  EXPECT_NEAR(r["mlpd"].get<double>(), -0.5 * std::log(2.0 * M_PI * v) - 0.5 * mu * mu / v, 1e-10);
  EXPECT_NEAR(r["rmse"].get<double>(), mu, 1e-12);
  EXPECT_EQ(r["n"], 1);
  ASSERT_EQ(run("eval -m " + path("g.json") + " -d " + one), 0);
  EXPECT_NEAR(Json::parse(ivgp::io::read_file(path("stdout")))["rmse"].get<double>(), 1.0 - mu, 1e-12);
}

TEST_F(Cli, PlotdataGridAndSinglePointAgree) {
  const std::string m = train_desk();
  ASSERT_EQ(run("plotdata -m " + m + " --grid -1:1:5 -o " + path("g.csv")), 0);
  const auto g = read_csv(ivgp::io::read_file(path("g.csv")));
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g[0], (std::vector<std::string>{"x0", "mu0", "var0", "lower0", "upper0"}));
  for (std::size_t r = 2; r < g.size(); ++r) EXPECT_LT(std::stod(g[r - 1][0]), std::stod(g[r][0]));
  ASSERT_EQ(run("plotdata -m " + m + " --grid 0.5:0.5:1 -o " + path("one.csv")), 0);
  ASSERT_EQ(run("predict -m " + m + " -d " + write("p.csv", "x0\n0.5\n") + " -o " + path("pred.csv")), 0);
  const auto one = read_csv(ivgp::io::read_file(path("one.csv"))), pred = read_csv(ivgp::io::read_file(path("pred.csv")));
  EXPECT_EQ(one[1][1], pred[1][0]);
  EXPECT_EQ(one[1][2], pred[1][1]);
  EXPECT_EQ(run("plotdata -m " + m + " --grid 1:0:3"), 2);
}

TEST_F(Cli, PlotdataBandCoversHoldout) {
  const std::string m = train_desk();
  const ivgp::io::Dataset h = ivgp::io::read_dataset(kRoot + "/data/desk30_holdout.csv");
  ASSERT_EQ(run("predict -m " + m + " -d " + kRoot + "/data/desk30_holdout.csv --observation-noise -o " + path("p.csv")), 0);
  const auto p = read_csv(ivgp::io::read_file(path("p.csv")));
  int inside = 0;
  for (Eigen::Index n = 0; n < h.Y.rows(); ++n) {
    const double mu = std::stod(p[static_cast<std::size_t>(n) + 1][0]), sd = std::sqrt(std::stod(p[static_cast<std::size_t>(n) + 1][1]));
    if (std::abs(h.Y(n, 0) - mu) <= 2.0 * sd) ++inside;
  }
  EXPECT_GE(static_cast<double>(inside) / static_cast<double>(h.Y.rows()), 0.93);
}

} // namespace
