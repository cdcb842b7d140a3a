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

#ifndef IVGP_TRAINING_HPP_
#define IVGP_TRAINING_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ivgp/models.hpp"
#include "ivgp/params.hpp"

namespace ivgp {

// Added to softplus outputs so positive parameters never reach zero.
inline constexpr double kPositiveFloor = 1e-12;

double softplus(double x);
double softplus_inverse(double y);

using VisitFn = std::function<void(ParamVisitor &)>;

/*
 * Flat view of a model's parameters. Values are read from the model through
 * its visit_params hook at construction, and written back by push(). The
 * free vector holds the unconstrained coordinates of trainable slots only.
 */
class ParameterStore {
public:
  struct Slot {
    std::string name;
    Transform transform = Transform::Identity;
    Eigen::Index tri_dim = 0;
    Eigen::Index offset = 0; // into values()
    Eigen::Index size = 0;
    bool trainable = true;
  };

  explicit ParameterStore(VisitFn visit);

  const std::vector<Slot> &slots() const { return slots_; }
  const Slot *find(const std::string &name) const;
  const Eigen::VectorXd &values() const { return values_; }

  // Marks every slot whose name starts with `prefix` (or equals it).
  void set_trainable(const std::string &prefix, bool trainable);
  void freeze_all();

  Eigen::Index num_free() const;
  Eigen::VectorXd free_vector() const;
  // Maps free coordinates back to constrained values and pushes them.
  void set_free_vector(const Eigen::Ref<const Eigen::VectorXd> &free);
  // d value / d free for each free coordinate.
  Eigen::VectorXd free_jacobian() const;
  // (slot index, element) of each free coordinate.
  std::vector<std::pair<std::size_t, Eigen::Index>> free_layout() const;

  void pull();
  void push() const;

private:
  bool positive_element(const Slot &slot, Eigen::Index k) const;

  VisitFn visit_;
  std::vector<Slot> slots_;
  Eigen::VectorXd values_;
};

// Gradients of the objective with respect to constrained values, by slot name.
using AnalyticGradients = std::map<std::string, Eigen::VectorXd>;

struct GradientProvider {
  enum class Strategy { FiniteDifference, Analytic };
  Strategy strategy = Strategy::Analytic;
  // Relative central-difference step: h * (1 + |theta|).
  double h = 1e-5;
  // Returns analytic gradients for whichever slots it supports.
  std::function<AnalyticGradients()> analytic;
};

// Gradient of `objective` in the free space of `store`. Slots covered by the
// provider's analytic gradients skip finite differences. The objective is
// evaluated with the store's values pushed into the model.
Eigen::VectorXd gradient(ParameterStore &store, const std::function<double()> &objective,
                         const GradientProvider &provider);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
};

// One Adam update that descends `grad`.
void adam_step(Eigen::VectorXd &x, const Eigen::Ref<const Eigen::VectorXd> &grad, AdamState &state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// dELBO/dq_mu and dELBO/dq_sqrt (packed) for a single-output Gaussian SVGP
// with a dense q_sqrt. Empty when the model is outside that family.
AnalyticGradients svgp_analytic_gradients(const SVGPModel &model,
                                          const Eigen::Ref<const Eigen::MatrixXd> &X,
                                          const Eigen::Ref<const Eigen::MatrixXd> &Y, double scale);

struct TrainingProblem {
  VisitFn visit;
  Eigen::Index num_data = 0;
  // ELBO estimate on the given rows, already scaled to the full data set.
  std::function<double(const std::vector<Eigen::Index> &rows, std::uint64_t seed)> elbo;
  // Optional analytic gradients of the same estimate.
  std::function<AnalyticGradients(const std::vector<Eigen::Index> &rows)> analytic;
};

struct FitConfig {
  Eigen::Index batch_size = 0; // 0: full batch
  Eigen::Index steps = 1000;
  double lr = 1e-2;
  std::uint64_t seed = 0;
  GradientProvider::Strategy strategy = GradientProvider::Strategy::Analytic;
  double fd_step = 1e-5;
};

struct TraceRecord {
  Eigen::Index step = 0;
  double elbo = 0.0;
  double wall_ms = 0.0;
  std::string warning;
};

// Maximizes the ELBO with Adam. Batches are drawn without replacement from a
// fresh permutation each epoch. A record carries a warning when its ELBO
// falls more than ten trailing standard deviations below the trailing mean.
std::vector<TraceRecord> fit(ParameterStore &store, const TrainingProblem &problem,
                             const FitConfig &config);

TrainingProblem svgp_problem(SVGPModel &model, const Eigen::MatrixXd &X, const Eigen::MatrixXd &Y);
TrainingProblem svgp_heterotopic_problem(SVGPModel &model, const Eigen::MatrixXd &X,
                                         const std::vector<Eigen::Index> &output_index,
                                         const Eigen::VectorXd &y);
TrainingProblem gpr_problem(GPRModel &model);
TrainingProblem dgp_problem(DGPModel &model, const Eigen::MatrixXd &X, const Eigen::MatrixXd &Y);
TrainingProblem uncertain_problem(UncertainSVGPModel &model, const Eigen::MatrixXd &Y);

} // namespace ivgp

#endif // IVGP_TRAINING_HPP_
