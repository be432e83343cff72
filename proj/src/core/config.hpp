// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "diagnostics.hpp"
#include "kernel.hpp"
#include "marg_check.hpp"
#include "model.hpp"

namespace gpsbc {

/// Inference flavour as written in a config: inducing points may be given or counted.
struct InferenceConfig {
  bool sparse = false;
  std::optional<InputPoints> inducing;
  std::int64_t num_inducing = 5;

  friend bool operator==(const InferenceConfig&, const InferenceConfig&) = default;
};

struct ModelConfig {
  std::optional<KernelSpec> kernel;  // unset: command default
  std::optional<std::vector<double>> noise_variance;
  std::optional<InferenceConfig> inference;
  std::optional<FaultSpec> fault;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct SbcSection {
  std::int64_t num_trials = 1000;
  std::int64_t num_posterior_samples = 100;
  std::optional<InputPoints> x;
  std::optional<InputPoints> x_star;
  std::uint64_t base_seed = 0;

  friend bool operator==(const SbcSection&, const SbcSection&) = default;
};

struct TrainingData {
  InputPoints x;
  Matrix y;

  friend bool operator==(const TrainingData& a, const TrainingData& b) {
    return a.x == b.x && a.y.rows() == b.y.rows() && a.y.cols() == b.y.cols() && a.y == b.y;
  }
};

struct MargCheckSection {
  std::optional<TrainingData> data;
  std::optional<std::string> data_csv;
  std::optional<HyperPrior> hyper_prior;  // unset: centred on the model, sigma 1
  OptimizerConfig optimizer;
  std::optional<double> valley_threshold;

  friend bool operator==(const MargCheckSection&, const MargCheckSection&) = default;
};

/// Fully validated experiment description.
struct ExperimentConfig {
  ModelConfig model;
  SbcSection sbc;
  DiagnosticsConfig diagnostics;
  std::optional<MargCheckSection> marg_check;
  std::optional<std::string> output_dir;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parse and validate a JSON config. Throws ConfigError naming the key or the
/// line/column of a syntax error. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);

/// JSON text that parse_config maps back to an equal config.
std::string serialize_config(const ExperimentConfig& config);

enum class Command { kSbc, kDemoBug, kMargCheck };

/// The model and SBC setup a command runs, with documented defaults filled in.
struct ResolvedExperiment {
  GpModel model;
  SbcConfig sbc;
};

ResolvedExperiment resolve_experiment(const ExperimentConfig& config, Command command);

/// Default geometry: X = 8 equispaced on [0, 1], X* = {0.0625, 0.1875, 0.3125, 0.4375}.
InputPoints default_training_inputs();
InputPoints default_test_inputs();

/// Read marg-check training data from CSV with header x_1..x_d, y_1..y_p.
TrainingData read_training_csv(const std::string& path);

}  // namespace gpsbc
