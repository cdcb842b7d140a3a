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

#include "ivgp/training.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "ivgp/covariances.hpp"
#include "ivgp/errors.hpp"

namespace ivgp {

double softplus(double x) {
  return (x > 30.0 ? x : std::log1p(std::exp(x))) + kPositiveFloor;
}

double softplus_inverse(double y) {
  if (!(y > 0.0))
    throw Error(ErrorCode::InvalidParameter, "positive parameter has value " + std::to_string(y));
  // Values at the floor map to the most negative representable free value.
  const double v = std::max(y - kPositiveFloor, std::numeric_limits<double>::min());
  return v > 30.0 ? v : v + std::log(-std::expm1(-v));
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class Collector final : public ParamVisitor {
public:
  std::vector<ParameterStore::Slot> slots;
  std::vector<double> values;
  void visit(const std::string &name, std::span<double> v, Transform t, Eigen::Index tri_dim) override {
    for (const auto &s : slots)
      if (s.name == name)
        throw Error(ErrorCode::DuplicateRegistration, "parameter " + name + " visited twice");
    ParameterStore::Slot slot;
    slot.name = name;
    slot.transform = t;
    slot.tri_dim = tri_dim;
    slot.offset = static_cast<Eigen::Index>(values.size());
    slot.size = static_cast<Eigen::Index>(v.size());
    slots.push_back(slot);
    values.insert(values.end(), v.begin(), v.end());
  }
};

class Writer final : public ParamVisitor {
public:
  Writer(const std::vector<ParameterStore::Slot> &slots, const Eigen::VectorXd &values)
      : slots_(slots), values_(values) {}
  void visit(const std::string &name, std::span<double> v, Transform, Eigen::Index) override {
    if (index_ >= slots_.size() || slots_[index_].name != name ||
        static_cast<Eigen::Index>(v.size()) != slots_[index_].size)
      throw Error(ErrorCode::ShapeMismatch, "model parameters changed shape under the store");
    const auto &slot = slots_[index_++];
    for (Eigen::Index k = 0; k < slot.size; ++k)
      v[static_cast<std::size_t>(k)] = values_(slot.offset + k);
  }

private:
  const std::vector<ParameterStore::Slot> &slots_;
  const Eigen::VectorXd &values_;
  std::size_t index_ = 0;
};

} // namespace

ParameterStore::ParameterStore(VisitFn visit) : visit_(std::move(visit)) { pull(); }

void ParameterStore::pull() {
  Collector c;
  visit_(c);
  std::vector<bool> trainable;
  for (const auto &s : slots_) trainable.push_back(s.trainable);
  const bool keep_flags = c.slots.size() == slots_.size();
  for (std::size_t i = 0; keep_flags && i < c.slots.size(); ++i) c.slots[i].trainable = slots_[i].trainable;
  slots_ = std::move(c.slots);
  values_ = Eigen::Map<const Eigen::VectorXd>(c.values.data(), static_cast<Eigen::Index>(c.values.size()));
}

void ParameterStore::push() const {
  Writer w(slots_, values_);
  visit_(w);
}

const ParameterStore::Slot *ParameterStore::find(const std::string &name) const {
  for (const auto &s : slots_)
    if (s.name == name) return &s;
  return nullptr;
}

void ParameterStore::set_trainable(const std::string &prefix, bool trainable) {
  for (auto &s : slots_)
    if (s.name.compare(0, prefix.size(), prefix) == 0) s.trainable = trainable;
}

void ParameterStore::freeze_all() {
  for (auto &s : slots_) s.trainable = false;
}

bool ParameterStore::positive_element(const Slot &slot, Eigen::Index k) const {
  if (slot.transform == Transform::Positive) return true;
  if (slot.transform != Transform::LowerTriangularPositiveDiag) return false;
  for (Eigen::Index j = 0; j < slot.tri_dim; ++j)
    if (LowerTriangular::diagonal_position(j, slot.tri_dim) == k) return true;
  return false;
}

std::vector<std::pair<std::size_t, Eigen::Index>> ParameterStore::free_layout() const {
  std::vector<std::pair<std::size_t, Eigen::Index>> layout;
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (slots_[i].trainable)
      for (Eigen::Index k = 0; k < slots_[i].size; ++k) layout.emplace_back(i, k);
  return layout;
}

Eigen::Index ParameterStore::num_free() const {
  Eigen::Index n = 0;
  for (const auto &s : slots_)
    if (s.trainable) n += s.size;
  return n;
}

Eigen::VectorXd ParameterStore::free_vector() const {
  const auto layout = free_layout();
  Eigen::VectorXd x(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Slot &slot = slots_[layout[i].first];
    const double v = values_(slot.offset + layout[i].second);
    x(static_cast<Eigen::Index>(i)) = positive_element(slot, layout[i].second) ? softplus_inverse(v) : v;
  }
  return x;
}

void ParameterStore::set_free_vector(const Eigen::Ref<const Eigen::VectorXd> &free) {
  const auto layout = free_layout();
  if (free.size() != static_cast<Eigen::Index>(layout.size()))
    throw Error(ErrorCode::ShapeMismatch, "free vector has the wrong length");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Slot &slot = slots_[layout[i].first];
    const double x = free(static_cast<Eigen::Index>(i));
    values_(slot.offset + layout[i].second) = positive_element(slot, layout[i].second) ? softplus(x) : x;
  }
  push();
}

Eigen::VectorXd ParameterStore::free_jacobian() const {
  const auto layout = free_layout();
  const Eigen::VectorXd x = free_vector();
  Eigen::VectorXd j(x.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Slot &slot = slots_[layout[i].first];
    const auto k = static_cast<Eigen::Index>(i);
    j(k) = positive_element(slot, layout[i].second) ? sigmoid(x(k)) : 1.0;
  }
  return j;
}

Eigen::VectorXd gradient(ParameterStore &store, const std::function<double()> &objective,
                         const GradientProvider &provider) {
  const Eigen::VectorXd x = store.free_vector();
  store.set_free_vector(x);
  const auto layout = store.free_layout();
  const Eigen::VectorXd jac = store.free_jacobian();
  AnalyticGradients analytic;
  if (provider.strategy == GradientProvider::Strategy::Analytic && provider.analytic)
    analytic = provider.analytic();

  Eigen::VectorXd g(x.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const auto &slot = store.slots()[layout[i].first];
    auto it = analytic.find(slot.name);
    if (it != analytic.end()) {
      g(k) = it->second(layout[i].second) * jac(k);
      continue;
    }
    const double step = provider.h * (1.0 + std::abs(x(k)));
    Eigen::VectorXd xp = x;
    xp(k) += step;
    store.set_free_vector(xp);
    const double fp = objective();
    xp(k) = x(k) - step;
    store.set_free_vector(xp);
    const double fm = objective();
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw Error(ErrorCode::NonFiniteObjective, "objective is not finite near " + slot.name);
    g(k) = (fp - fm) / (2.0 * step);
  }
  store.set_free_vector(x);
  return g;
}

void adam_step(Eigen::VectorXd &x, const Eigen::Ref<const Eigen::VectorXd> &grad, AdamState &state,
               double lr, double beta1, double beta2, double eps) {
  if (state.m.size() != x.size()) {
    state.m = Eigen::VectorXd::Zero(x.size());
    state.v = Eigen::VectorXd::Zero(x.size());
    state.t = 0;
  }
  ++state.t;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  x.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

AnalyticGradients svgp_analytic_gradients(const SVGPModel &model,
                                          const Eigen::Ref<const Eigen::MatrixXd> &X,
                                          const Eigen::Ref<const Eigen::MatrixXd> &Y, double scale) {
  if (model.likelihood.kind() != Likelihood::Kind::Gaussian || output_count(*model.kernel) != 1 ||
      model.q.is_block() || is_latent_inducing(*model.inducing) ||
      !dynamic_cast<const SingleOutputKernel *>(model.kernel.get()))
    return {};
  const StructuredPSD Kuu = kuu(*model.inducing, *model.kernel, model.jitter);
  KufResult kr = kuf(*model.inducing, *model.kernel, X);
  const auto *Kuf = std::get_if<Eigen::MatrixXd>(&kr);
  if (!Kuf) return {};
  const LowerTriangular L = cholesky(Kuu.densify());
  const Eigen::MatrixXd A = tri_solve(L, *Kuf);
  const Eigen::MatrixXd B = model.q.whiten ? A : tri_solve(L, A, true);
  const Eigen::MatrixXd Ls = model.q.dense_sqrt();
  const Eigen::VectorXd &m = model.q.q_mu;
  Eigen::VectorXd mu = B.transpose() * m;
  if (model.mean.kind != MeanFunction::Kind::Zero) mu += model.mean.evaluate(X, 1).col(0);
  const double c = scale / model.likelihood.variance();

  Eigen::VectorXd dm = c * B * (Y.col(0) - mu);
  Eigen::MatrixXd dL = -c * B * (B.transpose() * Ls);
  if (model.q.whiten) {
    dm -= m;
    dL -= Ls;
  } else {
    dm -= tri_solve(L, tri_solve(L, m), true);
    dL -= tri_solve(L, tri_solve(L, Ls), true);
  }
  dL.diagonal().array() += Ls.diagonal().array().inverse();

  AnalyticGradients out;
  out["q_mu"] = dm;
  const LowerTriangular packed = LowerTriangular::from_dense(dL);
  out["q_sqrt"] = Eigen::Map<const Eigen::VectorXd>(packed.packed().data(),
                                                    static_cast<Eigen::Index>(packed.packed().size()));
  return out;
}

namespace {

std::uint64_t step_seed(std::uint64_t seed, Eigen::Index step) {
  RngState r(seed);
  return r.split(static_cast<std::uint64_t>(step)).next_u64();
}

} // namespace

std::vector<TraceRecord> fit(ParameterStore &store, const TrainingProblem &problem,
                             const FitConfig &config) {
  const Eigen::Index N = problem.num_data;
  if (N < 1) throw Error(ErrorCode::DataError, "no training data");
  const Eigen::Index batch = (config.batch_size <= 0 || config.batch_size > N) ? N : config.batch_size;
  const auto start = std::chrono::steady_clock::now();

  RngState shuffle_rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::Index cursor = N;

  Eigen::VectorXd x = store.free_vector();
  store.set_free_vector(x);
  AdamState adam;
  std::deque<double> trailing;
  constexpr std::size_t kWindow = 20;
  std::vector<TraceRecord> trace;

  for (Eigen::Index step = 0; step < config.steps; ++step) {
    std::vector<Eigen::Index> rows;
    if (batch == N) {
      rows = order;
      std::sort(rows.begin(), rows.end());
    } else {
      if (cursor >= N) {
        for (Eigen::Index i = N - 1; i > 0; --i) {
          const auto j = static_cast<Eigen::Index>(shuffle_rng.next_u64() % static_cast<std::uint64_t>(i + 1));
          std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        cursor = 0;
      }
      const Eigen::Index take = std::min(batch, N - cursor);
      rows.assign(order.begin() + cursor, order.begin() + cursor + take);
      cursor += take;
    }
    const std::uint64_t seed = step_seed(config.seed, step);
    auto objective = [&] { return problem.elbo(rows, seed); };
    const double value = objective();
    if (!std::isfinite(value))
      throw Error(ErrorCode::NonFiniteObjective, "ELBO is not finite at step " + std::to_string(step));

    if (store.num_free() > 0) {
      GradientProvider provider;
      provider.strategy = config.strategy;
      provider.h = config.fd_step;
      if (problem.analytic) provider.analytic = [&] { return problem.analytic(rows); };
      const Eigen::VectorXd g = gradient(store, objective, provider);
      adam_step(x, -g, adam, config.lr);
      store.set_free_vector(x);
    }

    TraceRecord rec;
    rec.step = step;
    rec.elbo = value;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (trailing.size() == kWindow) {
      const double mean = std::accumulate(trailing.begin(), trailing.end(), 0.0) / kWindow;
      double var = 0.0;
      for (double t : trailing) var += (t - mean) * (t - mean);
      const double sd = std::sqrt(var / (kWindow - 1));
      if (sd > 0.0 && value < mean - 10.0 * sd)
        rec.warning = "ELBO dropped " + std::to_string((mean - value) / sd) +
                      " trailing standard deviations";
      trailing.pop_front();
    }
    trailing.push_back(value);
    trace.push_back(rec);
  }
  return trace;
}

namespace {

double batch_scale(Eigen::Index num_data, std::size_t rows) {
  return static_cast<double>(num_data) / static_cast<double>(rows);
}

} // namespace

TrainingProblem svgp_problem(SVGPModel &model, const Eigen::MatrixXd &X, const Eigen::MatrixXd &Y) {
  TrainingProblem p;
  p.visit = [&model](ParamVisitor &v) { model.visit_params(v); };
  p.num_data = X.rows();
  p.elbo = [&model, &X, &Y](const std::vector<Eigen::Index> &rows, std::uint64_t seed) {
    const double scale = batch_scale(X.rows(), rows.size());
    if (const auto *mc = std::get_if<MonteCarlo>(&model.likelihood.strategy())) {
      SVGPModel copy = model;
      copy.likelihood.set_strategy(MonteCarlo{mc->samples, seed});
      return svgp_elbo(copy, X(rows, Eigen::all), Y(rows, Eigen::all), scale);
    }
    return svgp_elbo(model, X(rows, Eigen::all), Y(rows, Eigen::all), scale);
  };
  p.analytic = [&model, &X, &Y](const std::vector<Eigen::Index> &rows) {
    return svgp_analytic_gradients(model, X(rows, Eigen::all), Y(rows, Eigen::all),
                                   batch_scale(X.rows(), rows.size()));
  };
  return p;
}

TrainingProblem svgp_heterotopic_problem(SVGPModel &model, const Eigen::MatrixXd &X,
                                         const std::vector<Eigen::Index> &output_index,
                                         const Eigen::VectorXd &y) {
  TrainingProblem p;
  p.visit = [&model](ParamVisitor &v) { model.visit_params(v); };
  p.num_data = X.rows();
  p.elbo = [&model, &X, &output_index, &y](const std::vector<Eigen::Index> &rows, std::uint64_t) {
    std::vector<Eigen::Index> idx;
    for (auto r : rows) idx.push_back(output_index[static_cast<std::size_t>(r)]);
    return svgp_elbo_heterotopic(model, X(rows, Eigen::all), idx, y(rows),
                                 batch_scale(X.rows(), rows.size()));
  };
  return p;
}

TrainingProblem gpr_problem(GPRModel &model) {
  TrainingProblem p;
  p.visit = [&model](ParamVisitor &v) { model.visit_params(v); };
  p.num_data = model.X.rows();
  p.elbo = [&model](const std::vector<Eigen::Index> &, std::uint64_t) { return gpr_log_marginal(model); };
  return p;
}

TrainingProblem dgp_problem(DGPModel &model, const Eigen::MatrixXd &X, const Eigen::MatrixXd &Y) {
  TrainingProblem p;
  p.visit = [&model](ParamVisitor &v) { model.visit_params(v); };
  p.num_data = X.rows();
  p.elbo = [&model, &X, &Y](const std::vector<Eigen::Index> &rows, std::uint64_t seed) {
    RngState rng(seed);
    return dgp_elbo(model, X(rows, Eigen::all), Y(rows, Eigen::all), rng,
                    batch_scale(X.rows(), rows.size()));
  };
  return p;
}

TrainingProblem uncertain_problem(UncertainSVGPModel &model, const Eigen::MatrixXd &Y) {
  TrainingProblem p;
  p.visit = [&model](ParamVisitor &v) { model.visit_params(v); };
  p.num_data = Y.rows();
  p.elbo = [&model, &Y](const std::vector<Eigen::Index> &rows, std::uint64_t seed) {
    RngState rng(seed);
    return uncertain_elbo(model, Y(rows, Eigen::all), rng, rows, batch_scale(Y.rows(), rows.size()));
  };
  return p;
}

} // namespace ivgp
