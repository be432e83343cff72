// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "sbc.hpp"

namespace gpsbc {

struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;  // 0 is a point mass at exp(mu)

  friend bool operator==(const LogNormal&, const LogNormal&) = default;
};

/// Independent log-normal prior per hyperparameter, in HyperLayout order.
struct HyperPrior {
  std::vector<LogNormal> entries;

  friend bool operator==(const HyperPrior&, const HyperPrior&) = default;
};

void validate_hyper_prior(const HyperPrior& prior);

/// Log-normal prior centred on `model`'s hyperparameters with a common log-scale sigma.
HyperPrior centred_hyper_prior(const GpModel& model, double sigma);

/// Natural-scale draw; every entry is positive.
Vector sample_hyper_prior(const HyperPrior& prior, RandomStream& rng);

/// Log-scale draw (mu + sigma z), exactly mu for point masses.
Vector sample_log_hyper_prior(const HyperPrior& prior, RandomStream& rng);

enum class AscentMethod {
  kBfgs,            // ascent direction preconditioned by a BFGS inverse-Hessian estimate
  kGradientAscent,  // raw gradient direction with a Barzilai-Borwein trial step
};

struct OptimizerConfig {
  AscentMethod method = AscentMethod::kBfgs;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  double armijo_slope = 1e-4;
  double contraction = 0.5;
  int restarts = 5;           // multi-start count for the fit to the real data
  int trial_restarts = 1;     // per-trial refits start once by default

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

void validate_optimizer_config(const OptimizerConfig& config);

struct Type2FitResult {
  Vector theta_hat;  // log scale, HyperLayout order
  double final_lml = 0.0;
  bool converged = false;
  int iterations = 0;
  int restarts_used = 0;
};

/*!
 * Type-II maximum likelihood by ascent on the log-hyperparameters with
 * Armijo backtracking. Each start is run to convergence (max-abs
 * gradient below tolerance) or the iteration cap; the best final value wins.
 *
 * Each iteration tries a unit step along the BFGS direction (or the
 * Barzilai-Borwein step for plain gradient ascent) and contracts it until the
 * objective strictly increases and the Armijo condition holds. Throws FitFailed when no start
 * has a finite objective.
 */
Type2FitResult fit_type2(const HyperLayout& layout, const InputPoints& x, const Matrix& y,
                         std::span<const Vector> init_thetas, const OptimizerConfig& config);

enum class MargVerdict { kMarginalisationNeeded, kType2Adequate, kInconclusive };
std::string to_string(MargVerdict v);

/// Default valley threshold and the geometry it was calibrated for.
inline constexpr double kDefaultValleyThreshold = 1.2;

struct MargCheckConfig {
  HyperPrior hyper_prior;
  OptimizerConfig optimizer;
  DiagnosticsConfig diagnostics;
  std::optional<double> valley_threshold;  // unset: default or null-calibrated
};

struct MargCheckReport {
  RankTally tally;
  UniformityReport uniformity;
  Type2FitResult prologue_fit;
  /// N x H log-hyperparameters of each trial's refit; NaN rows for failed trials.
  Matrix per_trial_theta;
  std::vector<int> per_trial_iterations;
  std::vector<char> per_trial_converged;
  std::vector<double> per_trial_lml;
  double valley_threshold = kDefaultValleyThreshold;
  std::string valley_threshold_source;
  MargVerdict verdict = MargVerdict::kInconclusive;
};

/*!
 * Valley threshold for a run: the default 1.2 when the pooled geometry
 * matches the defaults (N = 1000, L = 100, m p = 4), otherwise the larger of
 * 1.2 and the null 95% quantile of the pooled valley score.
 */
std::pair<double, std::string> resolve_valley_threshold(const MargCheckConfig& config, const SbcConfig& sbc,
                                                        Eigen::Index num_outputs);

/*!
 * Marginalisation check: fit the template to (X, y_real) by Type-II ML, use
 * the fitted model to simulate each trial's data, refit from an initial value
 * drawn from the hyperparameter prior, and rank the prior function against the
 * refitted exact posterior. The SBC inputs are X and sbc.x_star; sbc.x is ignored.
 */
MargCheckReport run_marg_check(const InputPoints& x, const Matrix& y_real, const HyperLayout& layout,
                               const SbcConfig& sbc, const MargCheckConfig& config, const RunOptions& options = {});

}  // namespace gpsbc
