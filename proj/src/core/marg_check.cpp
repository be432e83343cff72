// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "marg_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace gpsbc {
namespace {

constexpr int kMaxBacktracks = 60;
constexpr double kMinStep = 1e-8;
constexpr double kMaxStep = 1e3;
constexpr double kMinRelativeStep = 1e-10;

struct Evaluation {
  double value = -std::numeric_limits<double>::infinity();
  Vector gradient;
  bool ok = false;
};

Evaluation evaluate(const HyperLayout& layout, const InputPoints& x, const Matrix& y, const Vector& theta) {
  Evaluation e;
  if (!theta.allFinite()) return e;
  try {
    const GpModel model = model_from_log_hyperparameters(layout, theta);
    auto lml = log_marginal_likelihood(model, x, y, true);
    if (!std::isfinite(lml.value) || !lml.gradient.allFinite()) return e;
    e.value = lml.value;
    e.gradient = std::move(lml.gradient);
    e.ok = true;
  } catch (const NumericalError&) {
  } catch (const InvalidArgument&) {
    // exp() overflowed into an invalid hyperparameter
  }
  return e;
}

Type2FitResult ascend(const HyperLayout& layout, const InputPoints& x, const Matrix& y, const Vector& init,
                      const OptimizerConfig& cfg, bool& ok) {
  Type2FitResult out;
  Vector theta = init;
  Evaluation cur = evaluate(layout, x, y, theta);
  ok = cur.ok;
  if (!ok) return out;

  const bool bfgs = cfg.method == AscentMethod::kBfgs;
  const Eigen::Index k = theta.size();
  Matrix h = Matrix::Identity(k, k);  // inverse-Hessian estimate of -lml
  bool scaled = false;
  double step = 1.0 / std::max(1.0, cur.gradient.cwiseAbs().maxCoeff());
  while (out.iterations < cfg.max_iterations) {
    if (cur.gradient.cwiseAbs().maxCoeff() < cfg.gradient_tolerance) break;
    Vector dir = bfgs ? Vector(h * cur.gradient) : cur.gradient;
    double slope = cur.gradient.dot(dir);
    if (!(slope > 0.0)) {
      // Curvature estimate lost positive definiteness; fall back to the gradient.
      h.setIdentity();
      scaled = false;
      dir = cur.gradient;
      slope = cur.gradient.squaredNorm();
    }
    double t = bfgs && scaled ? 1.0 : step;
    Evaluation next;
    Vector candidate;
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      // A step this small can no longer change the objective measurably.
      if (t * dir.cwiseAbs().maxCoeff() <= kMinRelativeStep * (1.0 + theta.cwiseAbs().maxCoeff())) break;
      candidate = theta + t * dir;
      next = evaluate(layout, x, y, candidate);
      // Strict increase as well: near the noise floor the Armijo term can round to zero.
      if (next.ok && next.value > cur.value && next.value >= cur.value + cfg.armijo_slope * t * slope) {
        accepted = true;
        break;
      }
      t *= cfg.contraction;
    }
    if (!accepted) break;

    // Curvature pair in minimization form.
    const Vector s = candidate - theta;
    const Vector g_diff = cur.gradient - next.gradient;
    const double sy = s.dot(g_diff);
    if (bfgs) {
      if (sy > 1e-12 * s.norm() * g_diff.norm()) {
        if (!scaled) {
          h *= sy / g_diff.squaredNorm();
          scaled = true;
        }
        const double rho = 1.0 / sy;
        const Matrix left = Matrix::Identity(k, k) - rho * s * g_diff.transpose();
        h = left * h * left.transpose() + rho * s * s.transpose();
      }
    } else {
      // Barzilai-Borwein guess for the next trial step.
      step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * t;
      step = std::clamp(step, kMinStep, kMaxStep);
    }

    theta = std::move(candidate);
    cur = std::move(next);
    ++out.iterations;
  }
  out.theta_hat = theta;
  out.final_lml = cur.value;
  out.converged = cur.gradient.cwiseAbs().maxCoeff() < cfg.gradient_tolerance;
  return out;
}

}  // namespace

void validate_hyper_prior(const HyperPrior& prior) {
  if (prior.entries.empty()) throw InvalidArgument("hyper prior: no entries");
  for (const auto& e : prior.entries) {
    if (!std::isfinite(e.mu)) throw InvalidArgument("hyper prior: mu must be finite");
    if (!(e.sigma >= 0.0) || !std::isfinite(e.sigma)) throw InvalidArgument("hyper prior: sigma must be >= 0");
  }
}

HyperPrior centred_hyper_prior(const GpModel& model, double sigma) {
  const Vector theta = log_hyperparameters(model);
  HyperPrior prior;
  for (Eigen::Index k = 0; k < theta.size(); ++k) prior.entries.push_back({theta(k), sigma});
  return prior;
}

Vector sample_log_hyper_prior(const HyperPrior& prior, RandomStream& rng) {
  Vector theta(static_cast<Eigen::Index>(prior.entries.size()));
  for (std::size_t k = 0; k < prior.entries.size(); ++k) {
    const auto& e = prior.entries[k];
    const double z = rng.normal();
    theta(static_cast<Eigen::Index>(k)) = e.sigma == 0.0 ? e.mu : e.mu + e.sigma * z;
  }
  return theta;
}

Vector sample_hyper_prior(const HyperPrior& prior, RandomStream& rng) {
  return sample_log_hyper_prior(prior, rng).array().exp();
}

void validate_optimizer_config(const OptimizerConfig& config) {
  if (config.max_iterations < 0) throw InvalidArgument("optimizer: max_iterations must be >= 0");
  if (!(config.gradient_tolerance > 0.0)) throw InvalidArgument("optimizer: gradient_tolerance must be > 0");
  if (!(config.armijo_slope > 0.0 && config.armijo_slope < 1.0)) throw InvalidArgument("optimizer: armijo_slope must lie in (0, 1)");
  if (!(config.contraction > 0.0 && config.contraction < 1.0)) throw InvalidArgument("optimizer: contraction must lie in (0, 1)");
  if (config.restarts < 1) throw InvalidArgument("optimizer: restarts must be >= 1");
  if (config.trial_restarts < 1) throw InvalidArgument("optimizer: trial_restarts must be >= 1");
}

Type2FitResult fit_type2(const HyperLayout& layout, const InputPoints& x, const Matrix& y,
                         std::span<const Vector> init_thetas, const OptimizerConfig& config) {
  validate_optimizer_config(config);
  if (init_thetas.empty()) throw InvalidArgument("fit_type2: need at least one initial value");
  std::optional<Type2FitResult> best;
  for (const auto& init : init_thetas) {
    if (init.size() != layout.size()) throw DimensionMismatch("fit_type2: initial value has the wrong length");
    bool ok = false;
    auto result = ascend(layout, x, y, init, config, ok);
    if (!ok) continue;
    if (!best || result.final_lml > best->final_lml) best = std::move(result);
  }
  if (!best) throw FitFailed("fit_type2: objective is not finite at any initial value");
  best->restarts_used = static_cast<int>(init_thetas.size());
  return *best;
}

std::string to_string(MargVerdict v) {
  switch (v) {
    case MargVerdict::kMarginalisationNeeded:
      return "marginalisation_needed";
    case MargVerdict::kType2Adequate:
      return "type2_adequate";
    case MargVerdict::kInconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

std::pair<double, std::string> resolve_valley_threshold(const MargCheckConfig& config, const SbcConfig& sbc,
                                                        Eigen::Index num_outputs) {
  if (config.valley_threshold) return {*config.valley_threshold, "configured"};
  const std::int64_t slices = sbc.x_star.size() * num_outputs;
  if (sbc.num_trials == 1000 && sbc.num_posterior_samples == 100 && slices == 4) {
    return {kDefaultValleyThreshold, "default"};
  }
  RandomStream rng(sbc.base_seed, stream_id::kDiagnostics + 7);
  const double q95 = null_valley_quantile(sbc.num_trials * slices, sbc.num_posterior_samples, 0.05,
                                          config.diagnostics.mc_reps, rng);
  return {std::max(kDefaultValleyThreshold, q95), "null_calibrated"};
}

MargCheckReport run_marg_check(const InputPoints& x, const Matrix& y_real, const HyperLayout& layout,
                               const SbcConfig& sbc_in, const MargCheckConfig& config, const RunOptions& options) {
  validate_hyper_prior(config.hyper_prior);
  validate_optimizer_config(config.optimizer);
  validate_diagnostics_config(config.diagnostics);
  if (static_cast<Eigen::Index>(config.hyper_prior.entries.size()) != layout.size()) {
    throw InvalidArgument("hyper prior needs " + std::to_string(layout.size()) + " entries");
  }
  if (y_real.rows() < 1 || y_real.rows() != x.size() || y_real.cols() != layout.output_dim) {
    throw DimensionMismatch("marg-check: training data must be n x p with n >= 1");
  }
  SbcConfig sbc = sbc_in;
  sbc.x = x;
  validate_sbc_config(sbc);

  MargCheckReport report;

  RandomStream prologue_rng(sbc.base_seed, stream_id::kPrologue, Lane::kHyperPrior);
  std::vector<Vector> inits;
  for (int r = 0; r < config.optimizer.restarts; ++r) inits.push_back(sample_log_hyper_prior(config.hyper_prior, prologue_rng));
  report.prologue_fit = fit_type2(layout, x, y_real, inits, config.optimizer);
  const GpModel fitted = model_from_log_hyperparameters(layout, report.prologue_fit.theta_hat);

  const auto n_trials = static_cast<std::size_t>(sbc.num_trials);
  report.per_trial_theta = Matrix::Constant(sbc.num_trials, layout.size(), std::numeric_limits<double>::quiet_NaN());
  report.per_trial_iterations.assign(n_trials, 0);
  report.per_trial_converged.assign(n_trials, 0);
  report.per_trial_lml.assign(n_trials, std::numeric_limits<double>::quiet_NaN());

  auto trial = [&](std::int64_t t) {
    RandomStream rng(sbc.base_seed, static_cast<std::uint64_t>(t));
    RandomStream hyper_rng(sbc.base_seed, static_cast<std::uint64_t>(t), Lane::kHyperPrior);
    const PriorDraw prior = sample_prior_joint(fitted, sbc.x, sbc.x_star, rng);
    const Matrix y = simulate_observations(prior.f, fitted.likelihood(), rng);

    std::vector<Vector> starts;
    for (int r = 0; r < config.optimizer.trial_restarts; ++r) starts.push_back(sample_log_hyper_prior(config.hyper_prior, hyper_rng));
    const auto fit = fit_type2(layout, sbc.x, y, starts, config.optimizer);
    const GpModel refit = model_from_log_hyperparameters(layout, fit.theta_hat);

    const PosteriorGaussian post = exact_posterior(refit, sbc.x, y, sbc.x_star);
    const Matrix samples = sample_posterior(post, sbc.num_posterior_samples, rng);
    auto ranks = rank_against_posterior(prior.f_star, samples, rng);

    const auto row = static_cast<std::size_t>(t);
    report.per_trial_theta.row(t) = fit.theta_hat.transpose();
    report.per_trial_iterations[row] = fit.iterations;
    report.per_trial_converged[row] = fit.converged ? 1 : 0;
    report.per_trial_lml[row] = fit.final_lml;
    return ranks;
  };

  report.tally = run_trials(sbc.x_star.size(), layout.output_dim, sbc.num_posterior_samples, sbc.num_trials, trial, options);
  report.uniformity = assess_pooled(report.tally, config.diagnostics.pooling, config.diagnostics, sbc.base_seed);
  std::tie(report.valley_threshold, report.valley_threshold_source) =
      resolve_valley_threshold(config, sbc, layout.output_dim);

  if (report.uniformity.verdict == Verdict::kInconclusive) {
    report.verdict = MargVerdict::kInconclusive;
  } else if (report.uniformity.verdict == Verdict::kFail && report.uniformity.valley_score > report.valley_threshold) {
    report.verdict = MargVerdict::kMarginalisationNeeded;
  } else {
    report.verdict = MargVerdict::kType2Adequate;
  }
  return report;
}

}  // namespace gpsbc
