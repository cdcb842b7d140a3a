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

#include "ivgp/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ivgp/errors.hpp"

namespace ivgp::io {

namespace {

[[noreturn]] void parse_error(const std::string &msg) { throw Error(ErrorCode::ParseError, msg); }
[[noreturn]] void data_error(const std::string &msg) { throw Error(ErrorCode::DataError, msg); }

// ---------------------------------------------------------------------------
// Config grammar

class ConfigParser {
public:
  explicit ConfigParser(const std::string &text) : s_(text) {}

  Json parse() { return entries('\0'); }

private:
  bool done() const { return i_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[i_]; }

  [[noreturn]] void fail(const std::string &msg) const {
    parse_error("config line " + std::to_string(line_) + ": " + msg);
  }

  void skip_comment() {
    while (!done() && s_[i_] != '\n') ++i_;
  }

  void skip_spaces() {
    while (!done()) {
      const char c = s_[i_];
      if (c == ' ' || c == '\t' || c == '\r') ++i_;
      else if (c == '#') skip_comment();
      else break;
    }
  }

  void skip_blank(bool separators) {
    while (!done()) {
      const char c = s_[i_];
      if (c == '\n') {
        ++line_;
        ++i_;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++i_;
      } else if (c == '#') {
        skip_comment();
      } else if (separators && (c == ',' || c == ';')) {
        ++i_;
      } else {
        break;
      }
    }
  }

  static bool word_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '+' || c == '-';
  }

  std::string word() {
    if (!word_start(peek())) fail(std::string("expected a name, found '") + peek() + "'");
    const std::size_t b = i_;
    while (!done() && word_char(s_[i_])) ++i_;
    return s_.substr(b, i_ - b);
  }

  Json entries(char end) {
    Json obj = Json::object();
    while (true) {
      skip_blank(true);
      if (done()) {
        if (end) fail("missing '}'");
        break;
      }
      if (end && peek() == end) {
        ++i_;
        break;
      }
      const std::string key = word();
      skip_spaces();
      Json v;
      if (peek() == '{') {
        ++i_;
        v = entries('}');
      } else if (peek() == '=') {
        ++i_;
        v = value();
      } else {
        fail("expected '=' or '{' after " + key);
      }
      if (obj.contains(key)) fail("duplicate key " + key);
      obj[key] = std::move(v);
      skip_spaces();
      const char c = peek();
      if (!(done() || c == '\n' || c == ',' || c == ';' || (end && c == end)))
        fail(std::string("unexpected '") + c + "' after value of " + key);
    }
    return obj;
  }

  Json value() {
    skip_spaces();
    const char c = peek();
    if (c == '[') {
      ++i_;
      Json arr = Json::array();
      while (true) {
        skip_blank(false);
        if (peek() == ']') {
          ++i_;
          break;
        }
        arr.push_back(value());
        skip_blank(false);
        if (peek() == ',') {
          ++i_;
        } else if (peek() == ']') {
          ++i_;
          break;
        } else {
          fail("expected ',' or ']' in list");
        }
      }
      return arr;
    }
    if (c == '"') {
      ++i_;
      std::string out;
      while (!done() && s_[i_] != '"') {
        if (s_[i_] == '\n') fail("unterminated string");
        if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
        out += s_[i_++];
      }
      if (done()) fail("unterminated string");
      ++i_;
      return out;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') return number();
    if (word_start(c)) {
      const std::string w = word();
      skip_spaces();
      if (peek() == '{') {
        ++i_;
        Json obj = entries('}');
        if (obj.contains("type")) fail("'type' is implied by " + w);
        obj["type"] = w;
        return obj;
      }
      if (w == "true") return true;
      if (w == "false") return false;
      return w;
    }
    fail("expected a value");
  }

  Json number() {
    std::size_t b = i_;
    while (!done() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.' ||
                       s_[i_] == '-' || s_[i_] == '+'))
      ++i_;
    const std::string tok = s_.substr(b, i_ - b);
    const bool integral = tok.find_first_not_of("+-0123456789") == std::string::npos;
    const char *first = tok.data() + (tok[0] == '+' ? 1 : 0);
    const char *last = tok.data() + tok.size();
    if (integral) {
      long long v = 0;
      auto r = std::from_chars(first, last, v);
      if (r.ec == std::errc() && r.ptr == last) return v;
    } else {
      double v = 0.0;
      auto r = std::from_chars(first, last, v);
      if (r.ec == std::errc() && r.ptr == last) return v;
    }
    fail("bad number '" + tok + "'");
  }

  const std::string &s_;
  std::size_t i_ = 0;
  int line_ = 1;
};

// ---------------------------------------------------------------------------
// JSON helpers

std::string type_of(const Json &j, const std::string &fallback) {
  if (j.is_null()) return fallback;
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object()) return j.value("type", fallback);
  parse_error("expected a name or a typed block, found " + j.dump());
}

const Json &field(const Json &j, const std::string &key) {
  static const Json null;
  if (!j.is_object()) return null;
  auto it = j.find(key);
  return it == j.end() ? null : *it;
}

double num(const Json &j, const std::string &key, double fallback) {
  const Json &v = field(j, key);
  if (v.is_null()) return fallback;
  if (!v.is_number()) parse_error(key + " must be a number");
  return v.get<double>();
}

Eigen::Index integer(const Json &j, const std::string &key, Eigen::Index fallback) {
  const Json &v = field(j, key);
  if (v.is_null()) return fallback;
  if (!v.is_number_integer()) parse_error(key + " must be an integer");
  return v.get<Eigen::Index>();
}

bool flag(const Json &j, const std::string &key, bool fallback) {
  const Json &v = field(j, key);
  if (v.is_null()) return fallback;
  if (!v.is_boolean()) parse_error(key + " must be true or false");
  return v.get<bool>();
}

Eigen::VectorXd vector_from(const Json &v, const std::string &what) {
  if (v.is_number()) return Eigen::VectorXd::Constant(1, v.get<double>());
  if (!v.is_array()) parse_error(what + " must be a number or a list");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) parse_error(what + " must contain numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return out;
}

Eigen::MatrixXd matrix_from(const Json &v, const std::string &what) {
  if (!v.is_array() || v.empty()) parse_error(what + " must be a list of rows");
  if (!v[0].is_array()) {
    const Eigen::VectorXd col = vector_from(v, what);
    return col;
  }
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector_from(v[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) parse_error(what + " rows have different lengths");
    out.row(r) = row.transpose();
  }
  return out;
}

Json matrix_to_json(const Eigen::MatrixXd &m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

const std::map<std::string, BaseKernel::Family> &family_names() {
  static const std::map<std::string, BaseKernel::Family> names = {
      {"sqexp", BaseKernel::Family::SquaredExponential}, {"matern12", BaseKernel::Family::Matern12},
      {"matern32", BaseKernel::Family::Matern32},       {"matern52", BaseKernel::Family::Matern52},
      {"linear", BaseKernel::Family::Linear},           {"white", BaseKernel::Family::White}};
  return names;
}

std::string short_name(BaseKernel::Family f) {
  for (const auto &[name, family] : family_names())
    if (family == f) return name;
  return "sqexp";
}

std::unique_ptr<Kernel> kernel_from(const Json &j, Eigen::Index input_dim);

std::unique_ptr<SingleOutputKernel> single_from(const Json &j, Eigen::Index input_dim) {
  auto k = kernel_from(j, input_dim);
  auto *s = dynamic_cast<SingleOutputKernel *>(k.get());
  if (!s) parse_error("a single-output kernel is required here, found " + type_of(j, "?"));
  k.release();
  return std::unique_ptr<SingleOutputKernel>(s);
}

std::vector<Cloned<SingleOutputKernel>> latents_from(const Json &j, Eigen::Index input_dim) {
  const Json &list = field(j, "latents");
  if (!list.is_array() || list.empty()) parse_error(type_of(j, "?") + " needs a non-empty latents list");
  std::vector<Cloned<SingleOutputKernel>> out;
  for (const auto &k : list) out.emplace_back(single_from(k, input_dim));
  return out;
}

Eigen::MatrixXd mixing_from(const Json &j, Eigen::Index latents) {
  const Json &w = field(j, "W");
  if (!w.is_null()) {
    Eigen::MatrixXd W = matrix_from(w, "W");
    if (W.cols() == 1 && latents > 1 && W.rows() == latents) W.transposeInPlace();
    return W;
  }
  const Eigen::Index P = integer(j, "outputs", 0);
  const Eigen::Index L = integer(j, "num_latent", latents);
  if (P < 1 || L < 1) parse_error(type_of(j, "?") + " needs W or outputs and num_latent");
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(P, L);
  for (Eigen::Index p = 0; p < P; ++p) W(p, p % L) = 1.0;
  return W;
}

std::unique_ptr<Kernel> kernel_from(const Json &j, Eigen::Index input_dim) {
  const std::string type = type_of(j, "sqexp");
  if (auto it = family_names().find(type); it != family_names().end()) {
    KernelParams p;
    p.variance = num(j, "variance", 1.0);
    const Json &ls = field(j, "lengthscales");
    if (!ls.is_null()) p.lengthscales = vector_from(ls, "lengthscales");
    else if (!field(j, "ard").is_null()) p.lengthscales = Eigen::VectorXd::Ones(integer(j, "ard", 1));
    else p.lengthscales = Eigen::VectorXd::Ones(1);
    if (p.lengthscales.size() > 1 && input_dim > 0 && p.lengthscales.size() != input_dim)
      parse_error(type + " has " + std::to_string(p.lengthscales.size()) + " lengthscales for " +
                  std::to_string(input_dim) + " input dimensions");
    return std::make_unique<BaseKernel>(it->second, p);
  }
  if (type == "conv") {
    const Json &image = field(j, "image");
    const Json &patch = field(j, "patch");
    if (!image.is_array() || image.size() != 2 || !patch.is_array() || patch.size() != 2)
      parse_error("conv needs image = [H, W] and patch = [h, w]");
    const auto H = image[0].get<Eigen::Index>(), W = image[1].get<Eigen::Index>();
    const auto h = patch[0].get<Eigen::Index>(), w = patch[1].get<Eigen::Index>();
    if (input_dim > 0 && H * W != input_dim)
      parse_error("conv image has " + std::to_string(H * W) + " pixels for " + std::to_string(input_dim) +
                  " input columns");
    return std::make_unique<Convolutional>(single_from(field(j, "base"), h * w), H, W, h, w);
  }
  if (type == "shared") {
    const Eigen::Index P = integer(j, "outputs", 0);
    if (P < 1) parse_error("shared needs outputs >= 1");
    return std::make_unique<SharedIndependent>(single_from(field(j, "base"), input_dim), P);
  }
  if (type == "separate") return std::make_unique<SeparateIndependent>(latents_from(j, input_dim));
  if (type == "lmc") {
    auto latents = latents_from(j, input_dim);
    Eigen::MatrixXd W = mixing_from(j, static_cast<Eigen::Index>(latents.size()));
    return std::make_unique<LinearCoregionalization>(std::move(latents), std::move(W));
  }
  if (type == "imc") {
    Eigen::MatrixXd W = mixing_from(j, 1);
    return std::make_unique<IntrinsicCoregionalization>(single_from(field(j, "base"), input_dim), std::move(W));
  }
  parse_error("unknown kernel type " + type);
}

Json kernel_structure(const Kernel &k) {
  if (const auto *b = dynamic_cast<const BaseKernel *>(&k))
    return {{"type", short_name(b->family())}, {"ard", b->params().lengthscales.size()}};
  if (const auto *c = dynamic_cast<const Convolutional *>(&k))
    return {{"type", "conv"},
            {"image", {c->height(), c->width()}},
            {"patch", {c->patch_h(), c->patch_w()}},
            {"base", kernel_structure(c->base())}};
  if (const auto *m = dynamic_cast<const IntrinsicCoregionalization *>(&k))
    return {{"type", "imc"},
            {"outputs", m->num_outputs()},
            {"num_latent", m->num_latent()},
            {"base", kernel_structure(m->latent(0))}};
  if (const auto *m = dynamic_cast<const LinearCoregionalization *>(&k)) {
    Json latents = Json::array();
    const Eigen::Index n = m->shared_latent() ? 1 : m->num_latent();
    for (Eigen::Index l = 0; l < n; ++l) latents.push_back(kernel_structure(m->latent(l)));
    return {{"type", "lmc"}, {"outputs", m->num_outputs()}, {"num_latent", m->num_latent()}, {"latents", latents}};
  }
  if (const auto *m = dynamic_cast<const SharedIndependent *>(&k))
    return {{"type", "shared"}, {"outputs", m->num_outputs()}, {"base", kernel_structure(m->latent(0))}};
  if (const auto *m = dynamic_cast<const SeparateIndependent *>(&k)) {
    Json latents = Json::array();
    for (Eigen::Index l = 0; l < m->num_latent(); ++l) latents.push_back(kernel_structure(m->latent(l)));
    return {{"type", "separate"}, {"latents", latents}};
  }
  throw Error(ErrorCode::UnsupportedCombination, "kernel " + k.type_tag() + " cannot be saved");
}

// ---------------------------------------------------------------------------
// Inducing variables

// M rows spread evenly over X, mapped to `width` columns.
Eigen::MatrixXd initial_inputs(const Eigen::MatrixXd &X, Eigen::Index M, Eigen::Index width) {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(M, width);
  if (X.rows() == 0 || X.cols() == 0) return Z;
  for (Eigen::Index i = 0; i < M; ++i) {
    const Eigen::Index r = (i * X.rows() / M) % X.rows();
    for (Eigen::Index c = 0; c < width; ++c) Z(i, c) = X(r, c % X.cols());
  }
  return Z;
}

std::unique_ptr<InducingVariable> inducing_from(const Json &j, const Kernel &kernel, const Eigen::MatrixXd &X,
                                                Eigen::Index width) {
  const std::string type = type_of(j, "points");
  const Eigen::Index fallback = std::max<Eigen::Index>(1, std::min<Eigen::Index>(10, X.rows()));
  if (type == "points" || type == "multiscale") {
    Eigen::MatrixXd Z;
    if (!field(j, "Z").is_null()) Z = matrix_from(field(j, "Z"), "Z");
    else Z = initial_inputs(X, integer(j, "num", fallback), integer(j, "dim", width));
    if (Z.rows() < 1) parse_error("inducing set is empty");
    if (type == "points") return std::make_unique<InducingPoints>(std::move(Z));
    const double s = num(j, "scale", 0.1);
    Eigen::MatrixXd scales = Eigen::MatrixXd::Constant(Z.rows(), Z.cols(), s);
    return std::make_unique<Multiscale>(std::move(Z), std::move(scales));
  }
  if (type == "patches") {
    const auto *conv = dynamic_cast<const Convolutional *>(&kernel);
    if (!conv) parse_error("patches inducing variables need a conv kernel");
    const Eigen::Index M = integer(j, "num", fallback);
    if (!field(j, "Z").is_null())
      return std::make_unique<InducingPatches>(matrix_from(field(j, "Z"), "Z"));
    Eigen::MatrixXd pool;
    if (X.rows() > 0) pool = conv->patches(X);
    return std::make_unique<InducingPatches>(initial_inputs(pool, M, conv->patch_size()));
  }
  if (type == "shared") {
    const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel);
    if (!mo) parse_error("shared inducing variables need a multioutput kernel");
    return std::make_unique<SharedIndependentInducingVariables>(
        inducing_from(field(j, "base"), mo->latent(0), X, width));
  }
  if (type == "separate") {
    const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel);
    if (!mo) parse_error("separate inducing variables need a multioutput kernel");
    const Json &parts = field(j, "parts");
    if (!parts.is_array() || static_cast<Eigen::Index>(parts.size()) != mo->num_latent())
      parse_error("separate needs one entry in parts per latent process (" + std::to_string(mo->num_latent()) + ")");
    std::vector<Cloned<InducingVariable>> out;
    for (std::size_t l = 0; l < parts.size(); ++l)
      out.emplace_back(inducing_from(parts[l], mo->latent(static_cast<Eigen::Index>(l)), X, width));
    return std::make_unique<SeparateIndependentInducingVariables>(std::move(out));
  }
  parse_error("unknown inducing type " + type);
}

Json inducing_structure(const InducingVariable &iv) {
  if (const auto *s = dynamic_cast<const SharedIndependentInducingVariables *>(&iv))
    return {{"type", "shared"}, {"base", inducing_structure(s->base())}};
  if (const auto *s = dynamic_cast<const SeparateIndependentInducingVariables *>(&iv)) {
    Json parts = Json::array();
    for (Eigen::Index l = 0; l < s->num_parts(); ++l) parts.push_back(inducing_structure(s->part(l)));
    return {{"type", "separate"}, {"parts", parts}};
  }
  const auto &ip = dynamic_cast<const InducingPoints &>(iv);
  std::string type = "points";
  if (dynamic_cast<const Multiscale *>(&iv)) type = "multiscale";
  if (dynamic_cast<const InducingPatches *>(&iv)) type = "patches";
  return {{"type", type}, {"num", ip.Z().rows()}, {"dim", ip.Z().cols()}};
}

// ---------------------------------------------------------------------------
// Likelihoods and means

Strategy strategy_from(const Json &j, const Strategy &fallback) {
  if (j.is_null()) return fallback;
  const std::string type = type_of(j, "");
  if (type == "closed") return ClosedForm{};
  if (type == "gh") return GaussHermite{static_cast<int>(integer(j, "nodes", 20))};
  if (type == "mc")
    return MonteCarlo{static_cast<int>(integer(j, "samples", 1000)),
                      static_cast<std::uint64_t>(integer(j, "seed", 0))};
  parse_error("unknown expectation strategy " + type);
}

Json strategy_structure(const Strategy &s) {
  if (const auto *g = std::get_if<GaussHermite>(&s)) return {{"type", "gh"}, {"nodes", g->nodes}};
  if (const auto *m = std::get_if<MonteCarlo>(&s)) return {{"type", "mc"}, {"samples", m->samples}, {"seed", m->seed}};
  return {{"type", "closed"}};
}

Likelihood likelihood_from(const Json &j) {
  const std::string type = type_of(j, "gaussian");
  Likelihood lik = Likelihood::gaussian(1.0);
  if (type == "gaussian") {
    lik = Likelihood::gaussian(num(j, "variance", 1.0));
  } else if (type == "correlated_gaussian") {
    if (!field(j, "covariance").is_null()) {
      lik = Likelihood::correlated_gaussian(matrix_from(field(j, "covariance"), "covariance"));
    } else {
      const Eigen::Index P = integer(j, "outputs", 0);
      if (P < 1) parse_error("correlated_gaussian needs covariance or outputs");
      lik = Likelihood::correlated_gaussian(Eigen::MatrixXd::Identity(P, P));
    }
  } else if (type == "bernoulli") {
    lik = Likelihood::bernoulli();
  } else if (type == "poisson") {
    lik = Likelihood::poisson();
  } else {
    parse_error("unknown likelihood " + type);
  }
  lik.set_strategy(strategy_from(field(j, "expectation"), lik.strategy()));
  return lik;
}

Json likelihood_structure(const Likelihood &lik) {
  static const std::map<Likelihood::Kind, std::string> names = {{Likelihood::Kind::Gaussian, "gaussian"},
                                                                {Likelihood::Kind::CorrelatedGaussian,
                                                                 "correlated_gaussian"},
                                                                {Likelihood::Kind::Bernoulli, "bernoulli"},
                                                                {Likelihood::Kind::Poisson, "poisson"}};
  Json j = {{"type", names.at(lik.kind())}, {"expectation", strategy_structure(lik.strategy())}};
  if (lik.kind() == Likelihood::Kind::CorrelatedGaussian) j["outputs"] = lik.num_outputs();
  return j;
}

MeanFunction mean_from(const Json &j, const std::string &fallback) {
  const std::string type = type_of(j, fallback);
  if (type == "zero") return MeanFunction::zero();
  if (type == "identity") return MeanFunction::identity();
  if (type == "constant") {
    if (!field(j, "value").is_null()) return MeanFunction::constant(vector_from(field(j, "value"), "value"));
    return MeanFunction::constant(Eigen::VectorXd::Zero(integer(j, "size", 1)));
  }
  parse_error("unknown mean function " + type);
}

Json mean_structure(const MeanFunction &m) {
  switch (m.kind) {
  case MeanFunction::Kind::Constant:
    return {{"type", "constant"}, {"size", m.values.size()}};
  case MeanFunction::Kind::Identity:
    return {{"type", "identity"}};
  default:
    return {{"type", "zero"}};
  }
}

// ---------------------------------------------------------------------------
// Parameter values

class Collect final : public ParamVisitor {
public:
  Json values = Json::object();
  void visit(const std::string &name, std::span<double> v, Transform, Eigen::Index) override {
    Json arr = Json::array();
    for (double x : v) arr.push_back(x);
    values[name] = std::move(arr);
  }
};

class Apply final : public ParamVisitor {
public:
  explicit Apply(const Json &values) : values_(values) {}
  std::size_t used = 0;
  void visit(const std::string &name, std::span<double> v, Transform t, Eigen::Index tri_dim) override {
    auto it = values_.find(name);
    if (it == values_.end() || !it->is_array()) parse_error("model file has no values for " + name);
    if (it->size() != v.size())
      parse_error("model file has " + std::to_string(it->size()) + " values for " + name + ", expected " +
                  std::to_string(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!(*it)[k].is_number()) parse_error(name + " has a non-numeric value");
      v[k] = (*it)[k].get<double>();
      if (!std::isfinite(v[k])) parse_error(name + " has a non-finite value");
      bool positive = t == Transform::Positive;
      if (t == Transform::LowerTriangularPositiveDiag)
        for (Eigen::Index d = 0; d < tri_dim; ++d)
          positive = positive || LowerTriangular::diagonal_position(d, tri_dim) == static_cast<Eigen::Index>(k);
      if (positive && !(v[k] > 0.0))
        throw Error(ErrorCode::InvalidParameter, name + " must be positive");
    }
    ++used;
  }

private:
  const Json &values_;
};

SVGPModel svgp_from(const Json &j, const Eigen::MatrixXd &X, Eigen::Index input_dim) {
  Cloned<Kernel> kernel(kernel_from(field(j, "kernel"), input_dim));
  Cloned<InducingVariable> iv(inducing_from(field(j, "inducing"), *kernel, X, input_dim));
  SVGPModel m = SVGPModel::make(kernel, likelihood_from(field(j, "likelihood")), iv, flag(j, "whiten", true));
  m.mean = mean_from(field(j, "mean"), "zero");
  m.jitter = num(j, "jitter", kDefaultKuuJitter);
  m.num_data = integer(j, "num_data", X.rows());
  return m;
}

Json svgp_structure(const SVGPModel &m) {
  return {{"kernel", kernel_structure(*m.kernel)},
          {"inducing", inducing_structure(*m.inducing)},
          {"likelihood", likelihood_structure(m.likelihood)},
          {"mean", mean_structure(m.mean)},
          {"whiten", m.q.whiten},
          {"jitter", m.jitter},
          {"num_data", m.num_data}};
}

DGPModel dgp_from(const Json &j, const Eigen::MatrixXd &X, Eigen::Index input_dim, Eigen::Index outputs) {
  const Json &layers = field(j, "layers");
  if (!layers.is_array() || layers.empty()) parse_error("dgp needs a non-empty layers list");
  DGPModel m;
  Eigen::Index width = input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Json &spec = layers[l];
    const bool last = l + 1 == layers.size();
    DGPLayer layer;
    layer.output_dim = integer(spec, "output_dim", last ? outputs : width);
    layer.kernel = Cloned<Kernel>(kernel_from(field(spec, "kernel"), width));
    layer.inducing = Cloned<InducingVariable>(inducing_from(field(spec, "inducing"), *layer.kernel, X, width));
    layer.q = SVGPModel::make(layer.kernel, Likelihood::gaussian(1.0), layer.inducing, flag(spec, "whiten", true)).q;
    layer.mean = mean_from(field(spec, "mean"), !last && layer.output_dim == width ? "identity" : "zero");
    m.layers.push_back(std::move(layer));
    width = m.layers.back().output_dim;
  }
  m.likelihood = likelihood_from(field(j, "likelihood"));
  m.num_samples = integer(j, "samples", 1);
  m.num_data = integer(j, "num_data", X.rows());
  m.jitter = num(j, "jitter", kDefaultKuuJitter);
  m.validate(input_dim);
  return m;
}

Json dgp_structure(const DGPModel &m) {
  Json layers = Json::array();
  for (const auto &layer : m.layers)
    layers.push_back({{"kernel", kernel_structure(*layer.kernel)},
                      {"inducing", inducing_structure(*layer.inducing)},
                      {"mean", mean_structure(layer.mean)},
                      {"output_dim", layer.output_dim},
                      {"whiten", layer.q.whiten}});
  return {{"layers", layers},
          {"likelihood", likelihood_structure(m.likelihood)},
          {"samples", m.num_samples},
          {"num_data", m.num_data},
          {"jitter", m.jitter}};
}

// Builds every kind from `j`; X supplies initial values and may be empty.
ModelBundle bundle_from(const Json &j, const Eigen::MatrixXd &X, const Eigen::MatrixXd &Y,
                        Eigen::Index input_dim, Eigen::Index outputs) {
  ModelBundle b;
  b.kind = type_of(field(j, "model"), "svgp");
  b.input_dim = input_dim;
  if (b.kind == "gpr") {
    GPRModel g;
    g.kernel = Cloned<Kernel>(kernel_from(field(j, "kernel"), input_dim));
    if (output_count(*g.kernel) != 1) parse_error("gpr needs a single-output kernel");
    const Likelihood lik = likelihood_from(field(j, "likelihood"));
    if (lik.kind() != Likelihood::Kind::Gaussian) parse_error("gpr needs a gaussian likelihood");
    g.noise_variance = lik.variance();
    g.X = X;
    g.Y = Y;
    b.gpr = std::move(g);
  } else if (b.kind == "svgp") {
    b.svgp = svgp_from(j, X, input_dim);
  } else if (b.kind == "dgp") {
    b.dgp = dgp_from(j, X, input_dim, outputs);
  } else if (b.kind == "svgp+uncertain") {
    UncertainSVGPModel u;
    u.svgp = svgp_from(j, X, input_dim);
    const Eigen::Index n = integer(j, "num_points", X.rows());
    u.input_mean = X.rows() == n ? X : Eigen::MatrixXd::Zero(n, input_dim);
    u.input_var = Eigen::MatrixXd::Constant(n, input_dim, num(j, "input_var", 0.01));
    u.num_samples = integer(j, "samples", 1);
    b.uncertain = std::move(u);
  } else {
    parse_error("unknown model kind " + b.kind);
  }
  return b;
}

} // namespace

// ---------------------------------------------------------------------------

Json parse_config(const std::string &text) { return ConfigParser(text).parse(); }

Json read_config(const std::string &path) { return parse_config(read_file(path)); }

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::DataError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::DataError, "cannot write " + path);
  out << text;
}

Eigen::Index Dataset::num_outputs() const {
  if (!heterotopic()) return Y.cols();
  Eigen::Index p = 0;
  for (auto i : output_index) p = std::max(p, i + 1);
  return p;
}

namespace {

std::vector<std::string> split_line(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool indexed_name(const std::string &s, char prefix, Eigen::Index &index) {
  if (s.size() < 2 || s[0] != prefix) return false;
  long long v = 0;
  auto r = std::from_chars(s.data() + 1, s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v < 0) return false;
  if (s.size() > 2 && s[1] == '0') return false;
  index = static_cast<Eigen::Index>(v);
  return true;
}

} // namespace

Dataset parse_dataset(const std::string &text, bool require_outputs) {
  std::vector<std::string> lines;
  {
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      lines.push_back(line);
    }
  }
  if (lines.empty()) data_error("dataset is empty");
  const auto header = split_line(lines[0]);
  std::map<Eigen::Index, std::size_t> xcols, ycols;
  std::optional<std::size_t> index_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    Eigen::Index k = 0;
    const std::string &h = header[c];
    if (indexed_name(h, 'x', k)) {
      if (!xcols.emplace(k, c).second) data_error("column " + h + " appears twice");
    } else if (indexed_name(h, 'y', k)) {
      if (!ycols.emplace(k, c).second) data_error("column " + h + " appears twice");
    } else if (h == "output_index") {
      if (index_col) data_error("column output_index appears twice");
      index_col = c;
    } else {
      data_error("unexpected column '" + h + "' in header");
    }
  }
  auto contiguous = [](const std::map<Eigen::Index, std::size_t> &cols, char p) {
    Eigen::Index expect = 0;
    for (const auto &[k, c] : cols)
      if (k != expect++) data_error(std::string("columns ") + p + "0.. are not contiguous");
  };
  contiguous(xcols, 'x');
  contiguous(ycols, 'y');
  if (xcols.empty()) data_error("dataset has no input columns");
  if (require_outputs && ycols.empty()) data_error("dataset has no output columns");
  if (index_col && ycols.size() > 1) data_error("heterotopic data (output_index) allows only y0");
  if (index_col && ycols.empty()) data_error("output_index needs a y0 column");

  const auto N = static_cast<Eigen::Index>(lines.size() - 1);
  Dataset d;
  d.X.resize(N, static_cast<Eigen::Index>(xcols.size()));
  d.Y.resize(N, static_cast<Eigen::Index>(ycols.size()));
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto cells = split_line(lines[static_cast<std::size_t>(n + 1)]);
    if (cells.size() != header.size())
      data_error("row " + std::to_string(n + 1) + " has " + std::to_string(cells.size()) + " cells, header has " +
                 std::to_string(header.size()));
    auto cell = [&](std::size_t c) {
      const std::string &s = cells[c];
      double v = 0.0;
      const char *first = s.data() + (!s.empty() && s[0] == '+' ? 1 : 0);
      auto r = std::from_chars(first, s.data() + s.size(), v);
      if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        data_error("row " + std::to_string(n + 1) + ", column " + header[c] + ": '" + s + "' is not a number");
      return v;
    };
    for (const auto &[k, c] : xcols) d.X(n, k) = cell(c);
    for (const auto &[k, c] : ycols) d.Y(n, k) = cell(c);
    if (index_col) {
      const double v = cell(*index_col);
      if (v < 0 || v != std::floor(v))
        data_error("row " + std::to_string(n + 1) + ": output_index must be a non-negative integer");
      d.output_index.push_back(static_cast<Eigen::Index>(v));
    }
  }
  if (N == 0) data_error("dataset has no rows");
  return d;
}

Dataset read_dataset(const std::string &path, bool require_outputs) {
  return parse_dataset(read_file(path), require_outputs);
}

Eigen::Index ModelBundle::num_outputs() const {
  if (gpr) return 1;
  if (svgp) return svgp->num_outputs();
  if (uncertain) return uncertain->svgp.num_outputs();
  if (dgp) return dgp->layers.back().output_dim;
  return 0;
}

Likelihood ModelBundle::likelihood() const {
  if (gpr) return Likelihood::gaussian(gpr->noise_variance);
  if (svgp) return svgp->likelihood;
  if (uncertain) return uncertain->svgp.likelihood;
  return dgp->likelihood;
}

void ModelBundle::visit_params(ParamVisitor &visitor) {
  if (gpr) gpr->visit_params(visitor);
  if (svgp) svgp->visit_params(visitor);
  if (dgp) dgp->visit_params(visitor);
  if (uncertain) uncertain->visit_params(visitor);
}

ModelBundle build_model(const Json &config, const Dataset &data) {
  Eigen::MatrixXd Y = data.Y;
  ModelBundle b = bundle_from(config, data.X, Y, data.X.cols(), data.num_outputs());
  const Eigen::Index P = b.num_outputs();
  if (data.heterotopic()) {
    if (b.kind != "svgp") data_error("heterotopic data is supported for svgp models only");
    if (data.num_outputs() > P)
      data_error("output_index reaches " + std::to_string(data.num_outputs() - 1) + " but the model has " +
                 std::to_string(P) + " outputs");
  } else if (data.Y.cols() != P) {
    data_error("dataset has " + std::to_string(data.Y.cols()) + " outputs, the model has " + std::to_string(P));
  }
  const Likelihood lik = b.likelihood();
  if (lik.kind() == Likelihood::Kind::CorrelatedGaussian && lik.num_outputs() != P)
    parse_error("likelihood covariance is " + std::to_string(lik.num_outputs()) + " x " +
                std::to_string(lik.num_outputs()) + " for " + std::to_string(P) + " outputs");
  return b;
}

Json model_to_json(ModelBundle &model) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = model.kind;
  j["input_dim"] = model.input_dim;
  j["training"] = model.training;
  if (model.gpr) {
    j["kernel"] = kernel_structure(*model.gpr->kernel);
    j["data"] = {{"X", matrix_to_json(model.gpr->X)}, {"Y", matrix_to_json(model.gpr->Y)}};
  } else if (model.svgp) {
    j.update(svgp_structure(*model.svgp));
  } else if (model.dgp) {
    j.update(dgp_structure(*model.dgp));
  } else if (model.uncertain) {
    j.update(svgp_structure(model.uncertain->svgp));
    j["num_points"] = model.uncertain->input_mean.rows();
    j["samples"] = model.uncertain->num_samples;
  }
  Collect c;
  model.visit_params(c);
  j["parameters"] = std::move(c.values);
  return j;
}

ModelBundle model_from_json(const Json &j) {
  if (!j.is_object()) parse_error("model file is not a JSON object");
  if (field(j, "schema_version") != kSchemaVersion)
    parse_error("unsupported model schema version " + field(j, "schema_version").dump());
  const Json &kind = field(j, "kind");
  if (!kind.is_string()) parse_error("model file has no kind");
  Json spec = j;
  spec["model"] = kind;
  const Eigen::Index D = integer(j, "input_dim", 0);
  if (D < 1) parse_error("model file has no input_dim");
  Eigen::MatrixXd X, Y;
  if (kind == "gpr") {
    X = matrix_from(field(field(j, "data"), "X"), "data.X");
    Y = matrix_from(field(field(j, "data"), "Y"), "data.Y");
    if (X.cols() != D || Y.rows() != X.rows()) parse_error("gpr training data has inconsistent shape");
  }
  if (kind == "gpr") {
    // The likelihood variance is stored among the parameters.
    spec["likelihood"] = Json{{"type", "gaussian"}};
  }
  ModelBundle b = bundle_from(spec, X, Y, D, 1);
  if (b.dgp) {
    const Eigen::Index P = integer(field(j, "layers").back(), "output_dim", 1);
    b.dgp->layers.back().output_dim = P;
  }
  b.training = field(j, "training").is_object() ? field(j, "training") : Json::object();
  const Json &values = field(j, "parameters");
  if (!values.is_object()) parse_error("model file has no parameters");
  Apply apply(values);
  b.visit_params(apply);
  if (apply.used != values.size()) parse_error("model file has parameters the model does not use");
  return b;
}

std::string dump_model(ModelBundle &model) { return model_to_json(model).dump(2) + "\n"; }

void save_model(ModelBundle &model, const std::string &path) { write_file(path, dump_model(model)); }

ModelBundle load_model(const std::string &path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception &e) {
    parse_error(std::string("model file: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const Json::exception &e) {
    parse_error(std::string("model file: ") + e.what());
  }
}

TrainSettings training_settings(const Json &config) {
  const Json &t = field(config, "training");
  if (!t.is_null() && !t.is_object()) parse_error("training must be a block");
  TrainSettings s;
  s.fit.steps = integer(t, "steps", 1000);
  s.fit.lr = num(t, "lr", 1e-2);
  s.fit.seed = static_cast<std::uint64_t>(integer(t, "seed", 0));
  s.fit.batch_size = integer(t, "batch_size", 0);
  s.fit.fd_step = num(t, "fd_step", 1e-5);
  const std::string g = type_of(field(t, "gradient"), "analytic");
  if (g == "analytic") s.fit.strategy = GradientProvider::Strategy::Analytic;
  else if (g == "fd") s.fit.strategy = GradientProvider::Strategy::FiniteDifference;
  else parse_error("gradient must be analytic or fd");
  if (s.fit.steps < 0 || !(s.fit.lr > 0.0) || !(s.fit.fd_step > 0.0)) parse_error("invalid training settings");
  const Json &freeze = field(t, "freeze");
  if (freeze.is_string()) s.freeze.push_back(freeze.get<std::string>());
  else if (freeze.is_array())
    for (const auto &f : freeze) {
      if (!f.is_string()) parse_error("freeze entries must be names");
      s.freeze.push_back(f.get<std::string>());
    }
  else if (!freeze.is_null()) parse_error("freeze must be a list of parameter prefixes");
  return s;
}

std::vector<TraceRecord> train(ModelBundle &model, const Dataset &data, const TrainSettings &settings) {
  ParameterStore store([&model](ParamVisitor &v) { model.visit_params(v); });
  for (const auto &prefix : settings.freeze) {
    bool any = false;
    for (const auto &slot : store.slots()) any = any || slot.name.compare(0, prefix.size(), prefix) == 0;
    if (!any) parse_error("freeze prefix '" + prefix + "' matches no parameter");
    store.set_trainable(prefix, false);
  }
  const Eigen::VectorXd y = data.Y.col(0);
  TrainingProblem problem;
  if (model.gpr) problem = gpr_problem(*model.gpr);
  else if (model.svgp && data.heterotopic()) problem = svgp_heterotopic_problem(*model.svgp, data.X, data.output_index, y);
  else if (model.svgp) problem = svgp_problem(*model.svgp, data.X, data.Y);
  else if (model.dgp) problem = dgp_problem(*model.dgp, data.X, data.Y);
  else problem = uncertain_problem(*model.uncertain, data.Y);
  auto trace = fit(store, problem, settings.fit);
  model.training = {{"seed", settings.fit.seed},
                    {"steps", settings.fit.steps},
                    {"lr", settings.fit.lr},
                    {"batch_size", settings.fit.batch_size}};
  return trace;
}

PosteriorMoments predict_f(const ModelBundle &model, const Eigen::Ref<const Eigen::MatrixXd> &X, bool full_cov,
                           bool full_output_cov, std::uint64_t seed, Eigen::Index samples) {
  if (X.cols() != model.input_dim)
    data_error("inputs have " + std::to_string(X.cols()) + " columns, the model expects " +
               std::to_string(model.input_dim));
  if (model.gpr) {
    PosteriorMoments pm = gpr_predict(*model.gpr, X, full_cov);
    pm.cov = pm.cov.reshaped(covariance_shape(X.rows(), 1, full_cov, full_output_cov));
    pm.full_cov = full_cov;
    pm.full_output_cov = full_output_cov;
    return pm;
  }
  if (model.svgp) return svgp_predict_f(*model.svgp, X, full_cov, full_output_cov);
  if (model.uncertain) return svgp_predict_f(model.uncertain->svgp, X, full_cov, full_output_cov);
  if (full_cov || full_output_cov)
    throw Error(ErrorCode::UnsupportedMode, "deep GP predictions are available in the marginal mode only");
  RngState rng(seed);
  const auto parts = dgp_predict_f(*model.dgp, X, rng, samples);
  const Eigen::Index N = X.rows(), P = model.num_outputs();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(N, P), second = Eigen::MatrixXd::Zero(N, P);
  for (const auto &pm : parts) {
    mean += pm.mean;
    second += pm.marginal_variance() + pm.mean.cwiseAbs2();
  }
  const double S = static_cast<double>(parts.size());
  mean /= S;
  PosteriorMoments out;
  out.mean = mean;
  const Eigen::MatrixXd var = (second / S - mean.cwiseAbs2()).cwiseMax(0.0);
  out.cov = Tensor({N, P});
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index p = 0; p < P; ++p) out.cov(n, p) = var(n, p);
  return out;
}

namespace {

Tensor marginal_tensor(const Eigen::MatrixXd &var) {
  Tensor t({var.rows(), var.cols()});
  for (Eigen::Index n = 0; n < var.rows(); ++n)
    for (Eigen::Index p = 0; p < var.cols(); ++p) t(n, p) = var(n, p);
  return t;
}

// Predictive log density of one moment set.
Eigen::VectorXd lpd(const Likelihood &lik, const PosteriorMoments &pm, const Dataset &data) {
  const Eigen::Index N = data.X.rows();
  if (!data.heterotopic()) {
    if (data.Y.cols() != pm.num_outputs())
      data_error("dataset has " + std::to_string(data.Y.cols()) + " outputs, the model has " +
                 std::to_string(pm.num_outputs()));
    if (lik.output_correlated()) return lik.predict_log_density(pm.mean, pm.cov, data.Y);
    return lik.predict_log_density(pm.mean, marginal_tensor(pm.marginal_variance()), data.Y);
  }
  const Eigen::MatrixXd var = pm.marginal_variance();
  Eigen::VectorXd out(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    const Eigen::Index p = data.output_index[static_cast<std::size_t>(n)];
    if (p >= pm.num_outputs()) data_error("output_index " + std::to_string(p) + " exceeds the model outputs");
    const Likelihood single = lik.marginalize_outputs({p});
    Eigen::MatrixXd mu(1, 1), y(1, 1);
    mu(0, 0) = pm.mean(n, p);
    y(0, 0) = data.Y(n, 0);
    Tensor v({1, 1});
    v(0, 0) = var(n, p);
    out(n) = single.predict_log_density(mu, v, y)(0);
  }
  return out;
}

} // namespace

Eigen::VectorXd log_predictive(const ModelBundle &model, const Dataset &data, std::uint64_t seed,
                               Eigen::Index samples) {
  const Likelihood lik = model.likelihood();
  if (!model.dgp) {
    const bool foc = lik.output_correlated() && !data.heterotopic();
    return lpd(lik, predict_f(model, data.X, false, foc), data);
  }
  if (data.X.cols() != model.input_dim) data_error("inputs do not match the model input dimension");
  RngState rng(seed);
  const auto parts = dgp_predict_f(*model.dgp, data.X, rng, samples);
  Eigen::MatrixXd all(data.X.rows(), static_cast<Eigen::Index>(parts.size()));
  for (std::size_t s = 0; s < parts.size(); ++s) all.col(static_cast<Eigen::Index>(s)) = lpd(lik, parts[s], data);
  Eigen::VectorXd out(all.rows());
  for (Eigen::Index n = 0; n < all.rows(); ++n) {
    const double m = all.row(n).maxCoeff();
    out(n) = m + std::log((all.row(n).array() - m).exp().mean());
  }
  return out;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trace_line(const TraceRecord &r) {
  Json j = {{"step", r.step}, {"elbo", r.elbo}, {"wall_ms", r.wall_ms}};
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j.dump();
}

std::string format_tensor(const Tensor &t) {
  std::string out = "# shape";
  for (auto d : t.shape()) out += " " + std::to_string(d);
  out += "\n";
  const Eigen::Index last = t.rank() == 0 ? 1 : t.dim(t.rank() - 1);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    out += format_double(t.data()[i]);
    out += ((i + 1) % last == 0) ? "\n" : ",";
  }
  return out;
}

Tensor parse_tensor(const std::string &text) {
  std::istringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || line.rfind("# shape", 0) != 0) data_error("tensor file has no shape header");
  Tensor::Shape shape;
  {
    std::istringstream hs(line.substr(7));
    Eigen::Index d = 0;
    while (hs >> d) shape.push_back(d);
  }
  Tensor t(shape);
  Eigen::Index i = 0;
  while (std::getline(ss, line)) {
    for (const auto &cell : split_line(line)) {
      if (i >= t.size()) data_error("tensor file has too many values");
      t.data()[i++] = std::stod(cell);
    }
  }
  if (i != t.size()) data_error("tensor file has too few values");
  return t;
}

} // namespace ivgp::io
