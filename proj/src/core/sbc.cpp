// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "sbc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "error.hpp"

namespace gpsbc {

void validate_sbc_config(const SbcConfig& config) {
  if (config.num_trials < 1) throw InvalidArgument("N must be >= 1");
  if (config.num_posterior_samples < 1) throw InvalidArgument("L must be >= 1");
  if (config.x.dim() != config.x_star.dim()) throw DimensionMismatch("X and X* differ in input dimension");
}

RankTally::RankTally(Eigen::Index num_test, Eigen::Index num_outputs, std::int64_t num_samples)
    : m_(num_test),
      p_(num_outputs),
      l_(num_samples),
      counts_(static_cast<std::size_t>(num_test * num_outputs * (num_samples + 1)), 0) {}

std::int64_t RankTally::count(Eigen::Index test_point, Eigen::Index output, std::int64_t rank) const {
  return slice(test_point, output)[static_cast<std::size_t>(rank)];
}

std::span<const std::int64_t> RankTally::slice(Eigen::Index test_point, Eigen::Index output) const {
  const auto offset = static_cast<std::size_t>((test_point * p_ + output) * (l_ + 1));
  return std::span<const std::int64_t>(counts_).subspan(offset, static_cast<std::size_t>(l_ + 1));
}

void RankTally::add_trial(std::span<const int> ranks) {
  if (static_cast<Eigen::Index>(ranks.size()) != m_ * p_) throw DimensionMismatch("rank vector has the wrong length");
  for (Eigen::Index i = 0; i < p_; ++i) {
    for (Eigen::Index j = 0; j < m_; ++j) {
      const int r = ranks[static_cast<std::size_t>(i * m_ + j)];
      if (r < 0 || r > l_) throw InvalidArgument("rank out of range");
      ++counts_[static_cast<std::size_t>((j * p_ + i) * (l_ + 1) + r)];
    }
  }
  ++completed_;
}

void RankTally::add_failure(std::int64_t trial_index) { failed_.push_back(trial_index); }

void RankTally::merge(const RankTally& other) {
  if (other.m_ != m_ || other.p_ != p_ || other.l_ != l_) throw DimensionMismatch("cannot merge tallies of different shape");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
  completed_ += other.completed_;
  failed_.insert(failed_.end(), other.failed_.begin(), other.failed_.end());
}

void RankTally::finalize() { std::sort(failed_.begin(), failed_.end()); }

int compute_rank(double prior_value, std::span<const double> posterior_values, RandomStream& rng) {
  if (posterior_values.empty()) throw InvalidArgument("compute_rank: need at least one posterior value");
  if (!std::isfinite(prior_value)) throw NumericalError("compute_rank: non-finite prior value");
  int below = 0;
  int ties = 0;
  for (double v : posterior_values) {
    if (!std::isfinite(v)) throw NumericalError("compute_rank: non-finite posterior value");
    if (v < prior_value) {
      ++below;
    } else if (v == prior_value) {
      ++ties;
    }
  }
  if (ties == 0) return below;
  return below + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(ties) + 1));
}

std::vector<int> rank_against_posterior(const Matrix& f_star, const Matrix& posterior_samples, RandomStream& rng) {
  const Eigen::Index m = f_star.rows();
  const Eigen::Index p = f_star.cols();
  if (posterior_samples.cols() != m * p) throw DimensionMismatch("posterior samples do not match the test set");
  std::vector<int> ranks(static_cast<std::size_t>(m * p));
  std::vector<double> column(static_cast<std::size_t>(posterior_samples.rows()));
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index idx = i * m + j;
      for (Eigen::Index s = 0; s < posterior_samples.rows(); ++s) column[static_cast<std::size_t>(s)] = posterior_samples(s, idx);
      ranks[static_cast<std::size_t>(idx)] = compute_rank(f_star(j, i), column, rng);
    }
  }
  return ranks;
}

std::vector<int> run_trial(const GpModel& model, const SbcConfig& config, std::int64_t trial_index) {
  RandomStream rng(config.base_seed, static_cast<std::uint64_t>(trial_index));
  const PriorDraw prior = sample_prior_joint(model, config.x, config.x_star, rng);
  const Matrix y = simulate_observations(prior.f, model.likelihood(), rng);
  const PosteriorGaussian post = posterior(model, config.x, y, config.x_star);
  const Matrix samples = sample_posterior(post, config.num_posterior_samples, rng);
  return rank_against_posterior(prior.f_star, samples, rng);
}

RankTally run_trials(Eigen::Index num_test, Eigen::Index num_outputs, std::int64_t num_samples,
                     std::int64_t num_trials, const TrialFunction& trial, const RunOptions& options) {
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(std::max<std::int64_t>(1, num_trials))));
  std::vector<RankTally> partial(workers, RankTally(num_test, num_outputs, num_samples));
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto work = [&](unsigned w) {
    RankTally& local = partial[w];
    for (;;) {
      if (stop.load(std::memory_order_relaxed)) return;
      const std::int64_t t = next.fetch_add(1);
      if (t >= num_trials) return;
      try {
        const auto ranks = trial(t);
        local.add_trial(ranks);
      } catch (const NumericalError&) {
        local.add_failure(t);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (error) std::rethrow_exception(error);

  RankTally tally = partial.front();
  for (unsigned w = 1; w < workers; ++w) tally.merge(partial[w]);
  tally.finalize();

  const auto failed = static_cast<std::int64_t>(tally.failed_trials().size());
  if (failed * 100 > num_trials) {
    std::ostringstream msg;
    msg << failed << " of " << num_trials << " trials failed numerically (limit 1%); failing trials:";
    for (auto t : tally.failed_trials()) msg << ' ' << t;
    throw TrialFailureLimit(msg.str(), tally.failed_trials());
  }
  return tally;
}

RankTally run_sbc(const GpModel& model, const SbcConfig& config, const RunOptions& options) {
  validate_sbc_config(config);
  if (config.x.dim() != model.input_dim()) throw DimensionMismatch("run_sbc: model and inputs disagree on dimension");
  return run_trials(config.x_star.size(), model.output_dim(), config.num_posterior_samples, config.num_trials,
                    [&](std::int64_t t) { return run_trial(model, config, t); }, options);
}

std::vector<std::vector<std::int64_t>> pool_tally(const RankTally& tally, Pooling mode) {
  const auto bins = static_cast<std::size_t>(tally.num_bins());
  const auto arrays = mode == Pooling::kSingle ? std::size_t{1} : static_cast<std::size_t>(tally.num_outputs());
  std::vector<std::vector<std::int64_t>> pooled(arrays, std::vector<std::int64_t>(bins, 0));
  for (Eigen::Index j = 0; j < tally.num_test(); ++j) {
    for (Eigen::Index i = 0; i < tally.num_outputs(); ++i) {
      auto& target = pooled[mode == Pooling::kSingle ? 0 : static_cast<std::size_t>(i)];
      const auto s = tally.slice(j, i);
      for (std::size_t r = 0; r < bins; ++r) target[r] += s[r];
    }
  }
  return pooled;
}

}  // namespace gpsbc
