// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rng.hpp"
#include "sbc.hpp"

namespace gpsbc {

using Counts = std::vector<std::int64_t>;
using CountView = std::span<const std::int64_t>;

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double regularized_gamma_q(double a, double x);
/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_upper_tail(double stat, double dof);

struct ChiSquareResult {
  double stat = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson statistic against equal expected counts T/B.
ChiSquareResult chi_square_uniformity(CountView counts);

/// Merge L+1 rank bins into B bins: rank r goes to floor(r * B / (L + 1)).
Counts rebin(CountView counts, std::int64_t bins);

/// Statistic of one count array; arrays of a pooled view are summed.
using StatFunction = std::function<double(CountView)>;

/// Chi-square statistic after rebinning to `bins` (0 keeps every rank).
StatFunction chi_square_stat(std::int64_t bins);

/*!
 * Monte Carlo p-value of the pooled statistic.
 *
 * Null tallies hold, for each of the N completed trials, one iid uniform rank
 * per (test point, output) slice, pooled the same way as the observation.
 * Returns (1 + #{null >= observed}) / (mc_reps + 1).
 */
double mc_calibrated_pvalue(const RankTally& tally, Pooling pooling, const StatFunction& stat, int mc_reps,
                            RandomStream& rng);

/*!
 * Number of rank values at which the observed ECDF leaves a simultaneous
 * (1 - alpha) envelope. The envelope comes from `mc_reps` ECDFs of iid uniform
 * ranks with the same total: pointwise order statistics, trimmed as far as
 * possible while still containing at least (1 - alpha) of the null curves
 * entirely.
 */
int ecdf_band_check(CountView counts, double alpha, int mc_reps, RandomStream& rng);

/*!
 * Mean count over the outer 10% of bins on each side divided by the mean over
 * the central 20% (widened by one bin when needed to stay centred). 1 under
 * uniformity, > 1 for a valley, < 1 for a hump. +infinity when the central
 * band is empty.
 */
double valley_score(CountView counts);

/// 1 - q quantile of the pooled valley score under the iid-uniform null.
double null_valley_quantile(std::int64_t total_ranks, std::int64_t num_samples, double quantile, int reps,
                            RandomStream& rng);

enum class Verdict { kPass, kFail, kInconclusive };
std::string to_string(Verdict v);

struct DiagnosticsConfig {
  double alpha = 0.01;
  std::int64_t bins = 0;  // 0 means L + 1
  int mc_reps = 1999;
  Pooling pooling = Pooling::kSingle;

  friend bool operator==(const DiagnosticsConfig&, const DiagnosticsConfig&) = default;
};

/// Throws InvalidArgument for alpha outside (0, 0.5), mc_reps < 999, bins == 1.
void validate_diagnostics_config(const DiagnosticsConfig& config);

struct UniformityReport {
  double chi2_stat = 0.0;
  int dof = 0;
  double p_value = 1.0;
  double p_value_mc = 1.0;
  int band_violations = 0;
  double valley_score = 1.0;
  Verdict verdict = Verdict::kPass;
};

/// fail iff p_value_mc < alpha; otherwise inconclusive on degenerate input.
Verdict decide_verdict(double p_value_mc, double alpha, double valley, bool failed_trials);

/// Full report for one (test point, output) slice; the analytic p-value is exact here.
UniformityReport assess_slice(CountView counts, std::int64_t completed, const DiagnosticsConfig& config,
                              bool failed_trials, RandomStream& rng);

/// Report for a pooled view of the tally; the Monte Carlo p-value decides.
UniformityReport assess_pooled(const RankTally& tally, Pooling pooling, const DiagnosticsConfig& config,
                               std::uint64_t seed);

/// Bins actually used for a given L.
std::int64_t effective_bins(const DiagnosticsConfig& config, std::int64_t num_samples);

}  // namespace gpsbc
