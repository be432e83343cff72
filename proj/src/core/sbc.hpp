// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "linalg.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace gpsbc {

struct SbcConfig {
  std::int64_t num_trials = 1000;          // N
  std::int64_t num_posterior_samples = 100;  // L
  InputPoints x;
  InputPoints x_star;
  std::uint64_t base_seed = 0;
};

/// Throws InvalidArgument unless N >= 1, L >= 1 and X, X* share a dimension.
void validate_sbc_config(const SbcConfig& config);

//---------------------------------------------------------------------------//
/*!
 * Rank counts: one histogram of L+1 bins per (test point, output) slice.
 *
 * Every slice sums to completed(). Indices of trials that failed numerically
 * are kept (sorted) in failed_trials().
 */
class RankTally {
 public:
  RankTally() = default;
  RankTally(Eigen::Index num_test, Eigen::Index num_outputs, std::int64_t num_samples);

  Eigen::Index num_test() const noexcept { return m_; }
  Eigen::Index num_outputs() const noexcept { return p_; }
  std::int64_t num_samples() const noexcept { return l_; }
  std::int64_t num_bins() const noexcept { return l_ + 1; }
  std::int64_t completed() const noexcept { return completed_; }
  const std::vector<std::int64_t>& failed_trials() const noexcept { return failed_; }

  std::int64_t count(Eigen::Index test_point, Eigen::Index output, std::int64_t rank) const;
  std::span<const std::int64_t> slice(Eigen::Index test_point, Eigen::Index output) const;
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

  /// Add one trial's ranks, laid out output-major (index = output * m + test point).
  void add_trial(std::span<const int> ranks);
  void add_failure(std::int64_t trial_index);
  void merge(const RankTally& other);
  /// Sort the failure list; call once after all merges.
  void finalize();

  friend bool operator==(const RankTally&, const RankTally&) = default;

 private:
  Eigen::Index m_ = 0;
  Eigen::Index p_ = 0;
  std::int64_t l_ = 0;
  std::int64_t completed_ = 0;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> failed_;
};

/*!
 * Rank of `prior_value` among `posterior_values`: the number strictly below,
 * plus a uniform draw on {0..t} when t values tie exactly.
 */
int compute_rank(double prior_value, std::span<const double> posterior_values, RandomStream& rng);

/// Ranks of one trial, output-major. Uses stream (base_seed, trial_index).
std::vector<int> run_trial(const GpModel& model, const SbcConfig& config, std::int64_t trial_index);

/// Ranks of the prior test values against the L posterior draws, output-major.
std::vector<int> rank_against_posterior(const Matrix& f_star, const Matrix& posterior_samples, RandomStream& rng);

struct RunOptions {
  unsigned threads = 1;
};

using TrialFunction = std::function<std::vector<int>(std::int64_t trial_index)>;

/*!
 * Run trials 0..N-1 on `threads` workers and merge their ranks.
 *
 * A trial that throws NumericalError is recorded and skipped; more than 1% of
 * failures aborts with TrialFailureLimit. The result does not depend on the
 * number of threads or on scheduling.
 */
RankTally run_trials(Eigen::Index num_test, Eigen::Index num_outputs, std::int64_t num_samples,
                     std::int64_t num_trials, const TrialFunction& trial, const RunOptions& options);

/// Algorithm: N independent trials of run_trial accumulated into a tally.
RankTally run_sbc(const GpModel& model, const SbcConfig& config, const RunOptions& options = {});

enum class Pooling { kPerOutput, kSingle };

/// kPerOutput: one array per output summed over test points. kSingle: one array.
std::vector<std::vector<std::int64_t>> pool_tally(const RankTally& tally, Pooling mode);

}  // namespace gpsbc
