// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"

namespace gpsbc {
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& constraint) {
  throw ConfigError(path + ": " + constraint);
}

std::string join(const std::string& parent, const std::string& key) { return parent.empty() ? key : parent + "." + key; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "must be an object");
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(join(path, key), "unknown key");
    }
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) fail(path, "must be > 0");
  return v;
}

std::int64_t get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "must be an integer");
  if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) fail(path, "is too large");
  return j.get<std::int64_t>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "must be a string");
  return j.get<std::string>();
}

std::vector<double> get_positive_list(const json& j, const std::string& path) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(get_positive(j, path));
    return out;
  }
  if (!j.is_array() || j.empty()) fail(path, "must be a positive number or a nonempty array of them");
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(get_positive(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

Matrix get_matrix(const json& j, const std::string& path, bool allow_flat_column) {
  if (!j.is_array()) fail(path, "must be an array");
  if (j.empty()) return Matrix(0, 1);
  if (allow_flat_column && j.front().is_number()) {
    Matrix m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t r = 0; r < j.size(); ++r) m(static_cast<Eigen::Index>(r), 0) = get_number(j[r], path + "[" + std::to_string(r) + "]");
    return m;
  }
  if (!j.front().is_array() || j.front().empty()) fail(path, "must be an array of nonempty rows");
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) fail(row_path, "rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = get_number(j[r][c], row_path + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

InputPoints get_points(const json& j, const std::string& path) {
  try {
    return InputPoints(get_matrix(j, path, true));
  } catch (const InvalidArgument& e) {
    fail(path, e.what());
  }
}

KernelSpec parse_kernel(const json& j, const std::string& path) {
  require_object(j, path);
  if (!j.contains("type")) fail(join(path, "type"), "is required");
  const std::string type = get_string(j.at("type"), join(path, "type"));
  if (type == "squared_exponential") {
    reject_unknown(j, path, {"type", "signal_variance", "lengthscales"});
    SquaredExponential se;
    if (j.contains("signal_variance")) se.signal_variance = get_positive(j.at("signal_variance"), join(path, "signal_variance"));
    if (j.contains("lengthscales")) se.lengthscales = get_positive_list(j.at("lengthscales"), join(path, "lengthscales"));
    return KernelSpec{se};
  }
  if (type == "linear_coregionalization") {
    reject_unknown(j, path, {"type", "latent_kernels", "mixing"});
    if (!j.contains("latent_kernels") || !j.at("latent_kernels").is_array() || j.at("latent_kernels").empty()) {
      fail(join(path, "latent_kernels"), "must be a nonempty array");
    }
    std::vector<KernelSpec> latents;
    const auto& lk = j.at("latent_kernels");
    for (std::size_t k = 0; k < lk.size(); ++k) {
      latents.push_back(parse_kernel(lk[k], join(path, "latent_kernels") + "[" + std::to_string(k) + "]"));
    }
    Matrix mixing = Matrix::Identity(static_cast<Eigen::Index>(latents.size()), static_cast<Eigen::Index>(latents.size()));
    if (j.contains("mixing")) mixing = get_matrix(j.at("mixing"), join(path, "mixing"), false);
    return make_lmc(std::move(latents), std::move(mixing));
  }
  if (type == "sum") {
    reject_unknown(j, path, {"type", "terms"});
    if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty()) fail(join(path, "terms"), "must be a nonempty array");
    std::vector<KernelSpec> terms;
    for (std::size_t k = 0; k < j.at("terms").size(); ++k) {
      terms.push_back(parse_kernel(j.at("terms")[k], join(path, "terms") + "[" + std::to_string(k) + "]"));
    }
    return make_sum(std::move(terms));
  }
  fail(join(path, "type"), "must be one of squared_exponential, linear_coregionalization, sum");
}

FaultSpec parse_fault(const json& j, const std::string& path) {
  require_object(j, path);
  if (!j.contains("type")) fail(join(path, "type"), "is required");
  const std::string type = get_string(j.at("type"), join(path, "type"));
  if (type == "scaled_posterior_variance") {
    reject_unknown(j, path, {"type", "factor"});
    if (!j.contains("factor")) fail(join(path, "factor"), "is required");
    const double f = get_positive(j.at("factor"), join(path, "factor"));
    if (f == 1.0) fail(join(path, "factor"), "must be != 1");
    return FaultSpec{ScaledPosteriorVariance{f}};
  }
  if (type == "shifted_posterior_mean") {
    reject_unknown(j, path, {"type", "offset"});
    if (!j.contains("offset")) fail(join(path, "offset"), "is required");
    const double o = get_number(j.at("offset"), join(path, "offset"));
    if (o == 0.0) fail(join(path, "offset"), "must be != 0");
    return FaultSpec{ShiftedPosteriorMean{o}};
  }
  reject_unknown(j, path, {"type"});
  if (type == "no_noise_in_predictive_variance") return FaultSpec{NoNoiseInPredictiveVariance{}};
  if (type == "transposed_mixing_matrix") return FaultSpec{TransposedMixingMatrix{}};
  if (type == "wrong_triangular_side") return FaultSpec{WrongTriangularSide{}};
  fail(join(path, "type"),
       "unknown fault variant (expected no_noise_in_predictive_variance, transposed_mixing_matrix, "
       "wrong_triangular_side, scaled_posterior_variance, shifted_posterior_mean)");
}

LogNormal parse_log_normal(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown(j, path, {"mu", "sigma"});
  LogNormal ln;
  if (j.contains("mu")) ln.mu = get_number(j.at("mu"), join(path, "mu"));
  if (j.contains("sigma")) {
    ln.sigma = get_number(j.at("sigma"), join(path, "sigma"));
    if (ln.sigma < 0.0) fail(join(path, "sigma"), "must be >= 0");
  }
  return ln;
}

std::vector<LogNormal> parse_log_normal_list(const json& j, const std::string& path, std::size_t count) {
  if (j.is_object()) return std::vector<LogNormal>(count, parse_log_normal(j, path));
  if (!j.is_array() || j.size() != count) fail(path, "must be an object or an array of " + std::to_string(count));
  std::vector<LogNormal> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(parse_log_normal(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

void validate_kernel_at(const KernelSpec& spec, const std::string& path) {
  try {
    validate_kernel(spec);
  } catch (const InvalidArgument& e) {
    fail(path, e.what());
  }
}

// Input/output dimensions the model will have for the plain commands.
std::pair<Eigen::Index, Eigen::Index> model_dims(const ModelConfig& model) {
  if (model.kernel) return {kernel_input_dim(*model.kernel), kernel_output_dim(*model.kernel)};
  return {1, 1};
}

ojson points_json(const Matrix& m) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ojson kernel_json(const KernelSpec& spec) {
  ojson j;
  if (const auto* se = std::get_if<SquaredExponential>(&spec.variant)) {
    j["type"] = "squared_exponential";
    j["signal_variance"] = se->signal_variance;
    j["lengthscales"] = se->lengthscales;
  } else if (const auto* lmc = std::get_if<LinearCoregionalization>(&spec.variant)) {
    j["type"] = "linear_coregionalization";
    j["latent_kernels"] = ojson::array();
    for (const auto& k : lmc->latent_kernels) j["latent_kernels"].push_back(kernel_json(k));
    j["mixing"] = points_json(lmc->mixing);
  } else {
    j["type"] = "sum";
    j["terms"] = ojson::array();
    for (const auto& k : std::get<SumKernel>(spec.variant).terms) j["terms"].push_back(kernel_json(k));
  }
  return j;
}

ojson fault_json(const FaultSpec& fault) {
  ojson j;
  j["type"] = fault_name(fault);
  if (const auto* s = std::get_if<ScaledPosteriorVariance>(&fault.variant)) j["factor"] = s->factor;
  if (const auto* s = std::get_if<ShiftedPosteriorMean>(&fault.variant)) j["offset"] = s->offset;
  return j;
}

ojson log_normal_json(const LogNormal& ln) {
  ojson j;
  j["mu"] = ln.mu;
  j["sigma"] = ln.sigma;
  return j;
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int column = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t k = 0; k < end; ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

InputPoints default_training_inputs() { return InputPoints::linspace(0.0, 1.0, 8); }

InputPoints default_test_inputs() {
  Matrix v(4, 1);
  for (int k = 0; k < 4; ++k) v(k, 0) = 0.125 * k + 0.0625;
  return InputPoints(std::move(v));
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte);
    throw ConfigError("syntax error at line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                      e.what());
  }
  require_object(root, "");
  reject_unknown(root, "", {"model", "sbc", "diagnostics", "marg_check", "output_dir"});
  ExperimentConfig cfg;

  if (root.contains("model")) {
    const auto& m = root.at("model");
    require_object(m, "model");
    reject_unknown(m, "model", {"kernel", "noise_variance", "inference", "fault"});
    if (m.contains("kernel")) {
      cfg.model.kernel = parse_kernel(m.at("kernel"), "model.kernel");
      validate_kernel_at(*cfg.model.kernel, "model.kernel");
    }
    if (m.contains("noise_variance")) {
      cfg.model.noise_variance = get_positive_list(m.at("noise_variance"), "model.noise_variance");
    }
    if (m.contains("inference")) {
      const auto& inf = m.at("inference");
      require_object(inf, "model.inference");
      reject_unknown(inf, "model.inference", {"type", "inducing", "num_inducing"});
      if (!inf.contains("type")) fail("model.inference.type", "is required");
      const std::string type = get_string(inf.at("type"), "model.inference.type");
      InferenceConfig ic;
      if (type == "sparse") {
        ic.sparse = true;
        if (inf.contains("inducing")) {
          ic.inducing = get_points(inf.at("inducing"), "model.inference.inducing");
          if (ic.inducing->size() < 1) fail("model.inference.inducing", "must be nonempty");
        }
        if (inf.contains("num_inducing")) {
          ic.num_inducing = get_integer(inf.at("num_inducing"), "model.inference.num_inducing");
          if (ic.num_inducing < 1) fail("model.inference.num_inducing", "must be ≥ 1");
        }
      } else if (type == "exact") {
        if (inf.contains("inducing") || inf.contains("num_inducing")) fail("model.inference", "exact inference takes no inducing points");
      } else {
        fail("model.inference.type", "must be exact or sparse");
      }
      cfg.model.inference = ic;
    }
    if (m.contains("fault") && !m.at("fault").is_null()) cfg.model.fault = parse_fault(m.at("fault"), "model.fault");
  }

  const auto [input_dim, output_dim] = model_dims(cfg.model);
  if (cfg.model.noise_variance && cfg.model.noise_variance->size() != 1 &&
      static_cast<Eigen::Index>(cfg.model.noise_variance->size()) != output_dim) {
    fail("model.noise_variance", "needs one entry per output (" + std::to_string(output_dim) + ")");
  }
  if (cfg.model.inference && cfg.model.inference->inducing && cfg.model.inference->inducing->dim() != input_dim) {
    fail("model.inference.inducing", "points must have the kernel's input dimension");
  }

  if (root.contains("sbc")) {
    const auto& s = root.at("sbc");
    require_object(s, "sbc");
    reject_unknown(s, "sbc", {"N", "L", "X", "Xstar", "base_seed"});
    if (s.contains("N")) {
      cfg.sbc.num_trials = get_integer(s.at("N"), "sbc.N");
      if (cfg.sbc.num_trials < 1) fail("sbc.N", "must be ≥ 1");
    }
    if (s.contains("L")) {
      cfg.sbc.num_posterior_samples = get_integer(s.at("L"), "sbc.L");
      if (cfg.sbc.num_posterior_samples < 1) fail("sbc.L", "must be ≥ 1");
    }
    if (s.contains("X")) cfg.sbc.x = get_points(s.at("X"), "sbc.X");
    if (s.contains("Xstar")) cfg.sbc.x_star = get_points(s.at("Xstar"), "sbc.Xstar");
    if (s.contains("base_seed")) {
      if (!s.at("base_seed").is_number_integer() || (s.at("base_seed").is_number_integer() && !s.at("base_seed").is_number_unsigned() && s.at("base_seed").get<std::int64_t>() < 0)) {
        fail("sbc.base_seed", "must be a non-negative 64-bit integer");
      }
      cfg.sbc.base_seed = s.at("base_seed").get<std::uint64_t>();
    }
    if (cfg.sbc.x && cfg.sbc.x->dim() != input_dim) fail("sbc.X", "points must have the kernel's input dimension");
    if (cfg.sbc.x_star && cfg.sbc.x_star->dim() != input_dim) fail("sbc.Xstar", "points must have the kernel's input dimension");
  }

  if (root.contains("diagnostics")) {
    const auto& d = root.at("diagnostics");
    require_object(d, "diagnostics");
    reject_unknown(d, "diagnostics", {"alpha", "bins", "mc_reps", "pooling"});
    if (d.contains("alpha")) {
      cfg.diagnostics.alpha = get_number(d.at("alpha"), "diagnostics.alpha");
      if (!(cfg.diagnostics.alpha > 0.0 && cfg.diagnostics.alpha < 0.5)) fail("diagnostics.alpha", "must lie in (0, 0.5)");
    }
    if (d.contains("bins")) {
      cfg.diagnostics.bins = get_integer(d.at("bins"), "diagnostics.bins");
      if (cfg.diagnostics.bins < 2) fail("diagnostics.bins", "must be ≥ 2");
      if (cfg.diagnostics.bins > cfg.sbc.num_posterior_samples + 1) fail("diagnostics.bins", "must be ≤ L + 1");
    }
    if (d.contains("mc_reps")) {
      const auto reps = get_integer(d.at("mc_reps"), "diagnostics.mc_reps");
      if (reps < 999 || reps > 1'000'000) fail("diagnostics.mc_reps", "must lie in [999, 1000000]");
      cfg.diagnostics.mc_reps = static_cast<int>(reps);
    }
    if (d.contains("pooling")) {
      const std::string pooling = get_string(d.at("pooling"), "diagnostics.pooling");
      if (pooling == "single") {
        cfg.diagnostics.pooling = Pooling::kSingle;
      } else if (pooling == "per_output") {
        cfg.diagnostics.pooling = Pooling::kPerOutput;
      } else {
        fail("diagnostics.pooling", "must be single or per_output");
      }
    }
  }

  if (root.contains("marg_check")) {
    const auto& mc = root.at("marg_check");
    require_object(mc, "marg_check");
    reject_unknown(mc, "marg_check", {"data", "data_csv", "hyper_prior", "optimizer", "valley_threshold"});
    MargCheckSection section;
    if (mc.contains("data")) {
      const auto& data = mc.at("data");
      require_object(data, "marg_check.data");
      reject_unknown(data, "marg_check.data", {"x", "y"});
      if (!data.contains("x") || !data.contains("y")) fail("marg_check.data", "needs both x and y");
      InputPoints x = get_points(data.at("x"), "marg_check.data.x");
      Matrix y = get_matrix(data.at("y"), "marg_check.data.y", true);
      if (x.size() < 1) fail("marg_check.data.x", "must be nonempty");
      if (y.rows() != x.size()) fail("marg_check.data.y", "needs one row per x row");
      if (x.dim() != input_dim) fail("marg_check.data.x", "points must have the kernel's input dimension");
      if (y.cols() != output_dim) fail("marg_check.data.y", "needs one column per output");
      section.data = TrainingData{std::move(x), std::move(y)};
    }
    if (mc.contains("data_csv")) section.data_csv = get_string(mc.at("data_csv"), "marg_check.data_csv");
    if (section.data && section.data_csv) fail("marg_check", "give data or data_csv, not both");
    if (mc.contains("hyper_prior")) {
      const auto& hp = mc.at("hyper_prior");
      require_object(hp, "marg_check.hyper_prior");
      reject_unknown(hp, "marg_check.hyper_prior", {"signal_variance", "lengthscales", "noise_variance"});
      for (const char* key : {"signal_variance", "lengthscales", "noise_variance"}) {
        if (!hp.contains(key)) fail(std::string("marg_check.hyper_prior.") + key, "is required");
      }
      HyperPrior prior;
      prior.entries.push_back(parse_log_normal(hp.at("signal_variance"), "marg_check.hyper_prior.signal_variance"));
      for (auto& e : parse_log_normal_list(hp.at("lengthscales"), "marg_check.hyper_prior.lengthscales",
                                           static_cast<std::size_t>(input_dim))) {
        prior.entries.push_back(e);
      }
      for (auto& e : parse_log_normal_list(hp.at("noise_variance"), "marg_check.hyper_prior.noise_variance",
                                           static_cast<std::size_t>(output_dim))) {
        prior.entries.push_back(e);
      }
      section.hyper_prior = std::move(prior);
    }
    if (mc.contains("optimizer")) {
      const auto& o = mc.at("optimizer");
      require_object(o, "marg_check.optimizer");
      reject_unknown(o, "marg_check.optimizer",
                     {"method", "max_iterations", "gradient_tolerance", "armijo_slope", "contraction", "restarts",
                      "trial_restarts"});
      auto& oc = section.optimizer;
      if (o.contains("method")) {
        const std::string m = get_string(o.at("method"), "marg_check.optimizer.method");
        if (m == "bfgs") {
          oc.method = AscentMethod::kBfgs;
        } else if (m == "gradient_ascent") {
          oc.method = AscentMethod::kGradientAscent;
        } else {
          fail("marg_check.optimizer.method", "must be \"bfgs\" or \"gradient_ascent\"");
        }
      }
      if (o.contains("max_iterations")) oc.max_iterations = static_cast<int>(get_integer(o.at("max_iterations"), "marg_check.optimizer.max_iterations"));
      if (o.contains("gradient_tolerance")) oc.gradient_tolerance = get_number(o.at("gradient_tolerance"), "marg_check.optimizer.gradient_tolerance");
      if (o.contains("armijo_slope")) oc.armijo_slope = get_number(o.at("armijo_slope"), "marg_check.optimizer.armijo_slope");
      if (o.contains("contraction")) oc.contraction = get_number(o.at("contraction"), "marg_check.optimizer.contraction");
      if (o.contains("restarts")) oc.restarts = static_cast<int>(get_integer(o.at("restarts"), "marg_check.optimizer.restarts"));
      if (o.contains("trial_restarts")) oc.trial_restarts = static_cast<int>(get_integer(o.at("trial_restarts"), "marg_check.optimizer.trial_restarts"));
      try {
        validate_optimizer_config(oc);
      } catch (const InvalidArgument& e) {
        fail("marg_check.optimizer", e.what());
      }
    }
    if (mc.contains("valley_threshold")) section.valley_threshold = get_positive(mc.at("valley_threshold"), "marg_check.valley_threshold");
    cfg.marg_check = std::move(section);
  }

  if (root.contains("output_dir")) cfg.output_dir = get_string(root.at("output_dir"), "output_dir");
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  ojson root = ojson::object();
  ojson model = ojson::object();
  if (cfg.model.kernel) model["kernel"] = kernel_json(*cfg.model.kernel);
  if (cfg.model.noise_variance) model["noise_variance"] = *cfg.model.noise_variance;
  if (cfg.model.inference) {
    ojson inf;
    inf["type"] = cfg.model.inference->sparse ? "sparse" : "exact";
    if (cfg.model.inference->sparse) {
      if (cfg.model.inference->inducing) inf["inducing"] = points_json(cfg.model.inference->inducing->values());
      inf["num_inducing"] = cfg.model.inference->num_inducing;
    }
    model["inference"] = inf;
  }
  model["fault"] = cfg.model.fault ? fault_json(*cfg.model.fault) : ojson(nullptr);
  root["model"] = model;

  ojson sbc;
  sbc["N"] = cfg.sbc.num_trials;
  sbc["L"] = cfg.sbc.num_posterior_samples;
  if (cfg.sbc.x) sbc["X"] = points_json(cfg.sbc.x->values());
  if (cfg.sbc.x_star) sbc["Xstar"] = points_json(cfg.sbc.x_star->values());
  sbc["base_seed"] = cfg.sbc.base_seed;
  root["sbc"] = sbc;

  ojson diag;
  diag["alpha"] = cfg.diagnostics.alpha;
  if (cfg.diagnostics.bins != 0) diag["bins"] = cfg.diagnostics.bins;
  diag["mc_reps"] = cfg.diagnostics.mc_reps;
  diag["pooling"] = cfg.diagnostics.pooling == Pooling::kSingle ? "single" : "per_output";
  root["diagnostics"] = diag;

  if (cfg.marg_check) {
    const auto& mc = *cfg.marg_check;
    ojson j = ojson::object();
    if (mc.data) {
      j["data"]["x"] = points_json(mc.data->x.values());
      j["data"]["y"] = points_json(mc.data->y);
    }
    if (mc.data_csv) j["data_csv"] = *mc.data_csv;
    if (mc.hyper_prior) {
      const auto& e = mc.hyper_prior->entries;
      const auto [d, p] = model_dims(cfg.model);
      ojson hp;
      hp["signal_variance"] = log_normal_json(e.at(0));
      hp["lengthscales"] = ojson::array();
      for (Eigen::Index k = 0; k < d; ++k) hp["lengthscales"].push_back(log_normal_json(e.at(static_cast<std::size_t>(1 + k))));
      hp["noise_variance"] = ojson::array();
      for (Eigen::Index k = 0; k < p; ++k) hp["noise_variance"].push_back(log_normal_json(e.at(static_cast<std::size_t>(1 + d + k))));
      j["hyper_prior"] = hp;
    }
    const auto& o = mc.optimizer;
    j["optimizer"] = {{"method", o.method == AscentMethod::kBfgs ? "bfgs" : "gradient_ascent"},
                      {"max_iterations", o.max_iterations}, {"gradient_tolerance", o.gradient_tolerance},
                      {"armijo_slope", o.armijo_slope},     {"contraction", o.contraction},
                      {"restarts", o.restarts},             {"trial_restarts", o.trial_restarts}};
    if (mc.valley_threshold) j["valley_threshold"] = *mc.valley_threshold;
    root["marg_check"] = j;
  }
  if (cfg.output_dir) root["output_dir"] = *cfg.output_dir;
  return root.dump(2) + "\n";
}

ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg, Command command) {
  const bool demo = command == Command::kDemoBug;
  KernelSpec kernel = cfg.model.kernel ? *cfg.model.kernel
                      : demo ? make_lmc({make_se(1.0, {0.5}), make_se(0.5, {0.4})}, Matrix::Identity(2, 2))
                             : make_se(1.0, {0.5});
  const Eigen::Index d = kernel_input_dim(kernel);
  const Eigen::Index p = kernel_output_dim(kernel);

  GaussianLikelihood lik{std::vector<double>(static_cast<std::size_t>(p), 0.1)};
  if (cfg.model.noise_variance) {
    const auto& nv = *cfg.model.noise_variance;
    if (nv.size() == 1) {
      lik.noise_variance.assign(static_cast<std::size_t>(p), nv.front());
    } else {
      lik.noise_variance = nv;
    }
  }

  auto default_points = [d](const char* key, InputPoints points) {
    if (d != 1) fail(key, "is required when the input dimension is not 1");
    return points;
  };

  Inference inference = ExactInference{};
  const InferenceConfig inf = cfg.model.inference ? *cfg.model.inference : InferenceConfig{demo, std::nullopt, 5};
  if (inf.sparse) {
    InputPoints z = inf.inducing ? *inf.inducing
                                 : default_points("model.inference.inducing", InputPoints::linspace(0.0, 1.0, inf.num_inducing));
    inference = SparseInference{std::move(z)};
  }

  SbcConfig sbc;
  sbc.num_trials = cfg.sbc.num_trials;
  sbc.num_posterior_samples = cfg.sbc.num_posterior_samples;
  sbc.base_seed = cfg.sbc.base_seed;
  sbc.x = cfg.sbc.x ? *cfg.sbc.x : default_points("sbc.X", default_training_inputs());
  sbc.x_star = cfg.sbc.x_star ? *cfg.sbc.x_star : default_points("sbc.Xstar", default_test_inputs());

  try {
    return {GpModel(std::move(kernel), std::move(lik), std::move(inference), cfg.model.fault), std::move(sbc)};
  } catch (const InvalidArgument& e) {
    fail("model", e.what());
  }
}

TrainingData read_training_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": missing header row");
  const auto header = split_csv_line(line);
  std::size_t d = 0;
  std::size_t p = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string expect_x = "x_" + std::to_string(d + 1);
    const std::string expect_y = "y_" + std::to_string(p + 1);
    if (p == 0 && header[c] == expect_x) {
      ++d;
    } else if (d > 0 && header[c] == expect_y) {
      ++p;
    } else {
      throw ConfigError(path + ": header column " + std::to_string(c + 1) + " is '" + header[c] + "', expected '" +
                        (p == 0 ? expect_x + "' or '" + expect_y : expect_y) + "'");
    }
  }
  if (d == 0 || p == 0) throw ConfigError(path + ": header needs x_1..x_d followed by y_1..y_p");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != d + p) {
      throw ConfigError(path + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " columns, expected " + std::to_string(d + p));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[c].size() || cells[c].empty() || !std::isfinite(v)) {
        throw ConfigError(path + ": row " + std::to_string(line_no) + ", column '" + header[c] +
                          "' is not a finite number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no data rows");
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  Matrix y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    for (std::size_t c = 0; c < p; ++c) y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][d + c];
  }
  return {InputPoints(std::move(x)), std::move(y)};
}

}  // namespace gpsbc
