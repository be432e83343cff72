// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"

namespace gpsbc {
namespace {

constexpr double kGammaEps = 1e-15;
constexpr int kGammaMaxIter = 10000;

// P(a, x) by its power series; converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kGammaMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Legendre continued fraction (modified Lentz).
double gamma_q_continued_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kGammaMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

std::int64_t total_of(CountView counts) { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

/// Histogram of `draws` iid uniform ranks on {0..num_bins-1}.
void draw_uniform_counts(std::int64_t draws, std::int64_t num_bins, RandomStream& rng, Counts& out) {
  out.assign(static_cast<std::size_t>(num_bins), 0);
  const auto bound = static_cast<std::uint64_t>(num_bins);
  for (std::int64_t k = 0; k < draws; ++k) ++out[rng.uniform_index(bound)];
}

/// Pooled arrays of an iid null tally: `arrays` arrays each of `per_array` ranks.
double null_pooled_stat(std::size_t arrays, std::int64_t per_array, std::int64_t num_bins, const StatFunction& stat,
                        RandomStream& rng, Counts& scratch) {
  double total = 0.0;
  for (std::size_t a = 0; a < arrays; ++a) {
    draw_uniform_counts(per_array, num_bins, rng, scratch);
    total += stat(scratch);
  }
  return total;
}

double mc_pvalue_impl(double observed, std::size_t arrays, std::int64_t per_array, std::int64_t num_bins,
                      const StatFunction& stat, int mc_reps, RandomStream& rng) {
  Counts scratch;
  int at_least = 0;
  for (int rep = 0; rep < mc_reps; ++rep) {
    if (null_pooled_stat(arrays, per_array, num_bins, stat, rng, scratch) >= observed) ++at_least;
  }
  return (1.0 + at_least) / (mc_reps + 1.0);
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw InvalidArgument("incomplete gamma: a must be > 0");
  if (x < 0.0 || std::isnan(x)) throw InvalidArgument("incomplete gamma: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
  return std::clamp(gamma_q_continued_fraction(a, x), 0.0, 1.0);
}

double chi_square_upper_tail(double stat, double dof) { return regularized_gamma_q(0.5 * dof, 0.5 * std::max(stat, 0.0)); }

ChiSquareResult chi_square_uniformity(CountView counts) {
  if (counts.size() < 2) throw InvalidArgument("chi-square: need at least two bins");
  const std::int64_t total = total_of(counts);
  if (total == 0) throw InvalidArgument("chi-square: total count is zero");
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff;
  }
  stat /= expected;
  const int dof = static_cast<int>(counts.size()) - 1;
  return {stat, dof, chi_square_upper_tail(stat, dof)};
}

Counts rebin(CountView counts, std::int64_t bins) {
  if (bins < 2) throw InvalidArgument("rebin: need at least two bins");
  const auto ranks = static_cast<std::int64_t>(counts.size());
  if (bins > ranks) throw InvalidArgument("rebin: more bins than ranks");
  Counts out(static_cast<std::size_t>(bins), 0);
  for (std::int64_t r = 0; r < ranks; ++r) out[static_cast<std::size_t>(r * bins / ranks)] += counts[static_cast<std::size_t>(r)];
  return out;
}

StatFunction chi_square_stat(std::int64_t bins) {
  return [bins](CountView counts) {
    if (bins == 0 || bins == static_cast<std::int64_t>(counts.size())) return chi_square_uniformity(counts).stat;
    const Counts merged = rebin(counts, bins);
    return chi_square_uniformity(merged).stat;
  };
}

double mc_calibrated_pvalue(const RankTally& tally, Pooling pooling, const StatFunction& stat, int mc_reps,
                            RandomStream& rng) {
  if (mc_reps < 1) throw InvalidArgument("mc_calibrated_pvalue: mc_reps must be positive");
  if (tally.completed() == 0) throw InvalidArgument("mc_calibrated_pvalue: empty tally");
  const auto pooled = pool_tally(tally, pooling);
  double observed = 0.0;
  for (const auto& arr : pooled) observed += stat(arr);
  const std::int64_t slices_per_array =
      pooling == Pooling::kSingle ? tally.num_test() * tally.num_outputs() : tally.num_test();
  return mc_pvalue_impl(observed, pooled.size(), slices_per_array * tally.completed(), tally.num_bins(), stat, mc_reps,
                        rng);
}

int ecdf_band_check(CountView counts, double alpha, int mc_reps, RandomStream& rng) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw InvalidArgument("ecdf_band_check: alpha must lie in (0, 0.5)");
  if (mc_reps < 1) throw InvalidArgument("ecdf_band_check: mc_reps must be positive");
  const auto bins = static_cast<std::int64_t>(counts.size());
  const std::int64_t total = total_of(counts);
  // The last ECDF value is always the total; only the first B-1 points vary.
  const auto points = static_cast<std::size_t>(std::max<std::int64_t>(bins - 1, 0));
  if (points == 0 || total == 0) return 0;

  const auto reps = static_cast<std::size_t>(mc_reps);
  std::vector<std::int64_t> curves(reps * points);  // rep-major cumulative counts
  Counts scratch;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    draw_uniform_counts(total, bins, rng, scratch);
    std::int64_t cum = 0;
    for (std::size_t k = 0; k < points; ++k) {
      cum += scratch[k];
      curves[rep * points + k] = cum;
    }
  }

  std::vector<std::vector<std::int64_t>> sorted(points, std::vector<std::int64_t>(reps));
  for (std::size_t k = 0; k < points; ++k) {
    for (std::size_t rep = 0; rep < reps; ++rep) sorted[k][rep] = curves[rep * points + k];
    std::sort(sorted[k].begin(), sorted[k].end());
  }

  // Depth of a null curve: how far it can trim from both ends and stay inside.
  std::vector<std::int64_t> depth(reps);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    auto d = static_cast<std::int64_t>(reps);
    for (std::size_t k = 0; k < points; ++k) {
      const auto v = curves[rep * points + k];
      const auto& col = sorted[k];
      const auto at_most = std::upper_bound(col.begin(), col.end(), v) - col.begin();
      const auto at_least = col.end() - std::lower_bound(col.begin(), col.end(), v);
      d = std::min<std::int64_t>(d, std::min(at_most, at_least) - 1);
    }
    depth[rep] = d;
  }
  std::sort(depth.begin(), depth.end());
  const auto excluded = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(reps)));
  const std::int64_t trim = depth[std::min(excluded, reps - 1)];
  const auto lo = static_cast<std::size_t>(trim);
  const auto hi = reps - 1 - static_cast<std::size_t>(trim);

  int violations = 0;
  std::int64_t cum = 0;
  for (std::size_t k = 0; k < points; ++k) {
    cum += counts[k];
    if (cum < sorted[k][lo] || cum > sorted[k][hi]) ++violations;
  }
  return violations;
}

double valley_score(CountView counts) {
  const auto bins = static_cast<std::int64_t>(counts.size());
  if (bins < 3) throw InvalidArgument("valley_score: need at least three bins");
  if (total_of(counts) < 1) throw InvalidArgument("valley_score: total count must be >= 1");
  const std::int64_t outer = std::max<std::int64_t>(1, bins / 10);
  std::int64_t central = std::max<std::int64_t>(1, (2 * bins) / 10);
  if ((bins - central) % 2 != 0) ++central;
  const std::int64_t start = (bins - central) / 2;

  double outer_sum = 0.0;
  for (std::int64_t k = 0; k < outer; ++k) {
    outer_sum += static_cast<double>(counts[static_cast<std::size_t>(k)]);
    outer_sum += static_cast<double>(counts[static_cast<std::size_t>(bins - 1 - k)]);
  }
  double central_sum = 0.0;
  for (std::int64_t k = start; k < start + central; ++k) central_sum += static_cast<double>(counts[static_cast<std::size_t>(k)]);
  if (central_sum == 0.0) return std::numeric_limits<double>::infinity();
  return (outer_sum / static_cast<double>(2 * outer)) / (central_sum / static_cast<double>(central));
}

double null_valley_quantile(std::int64_t total_ranks, std::int64_t num_samples, double quantile, int reps,
                            RandomStream& rng) {
  if (reps < 1) throw InvalidArgument("null_valley_quantile: reps must be positive");
  std::vector<double> scores(static_cast<std::size_t>(reps));
  Counts scratch;
  for (auto& s : scores) {
    draw_uniform_counts(total_ranks, num_samples + 1, rng, scratch);
    s = valley_score(scratch);
  }
  std::sort(scores.begin(), scores.end());
  const auto idx = static_cast<std::size_t>(std::ceil((1.0 - quantile) * reps)) - 1;
  return scores[std::min(idx, scores.size() - 1)];
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass:
      return "pass";
    case Verdict::kFail:
      return "fail";
    case Verdict::kInconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

void validate_diagnostics_config(const DiagnosticsConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 0.5)) throw InvalidArgument("alpha must lie in (0, 0.5)");
  if (config.mc_reps < 999) throw InvalidArgument("mc_reps must be >= 999");
  if (config.bins == 1 || config.bins < 0) throw InvalidArgument("bins must be 0 (all ranks) or >= 2");
}

std::int64_t effective_bins(const DiagnosticsConfig& config, std::int64_t num_samples) {
  return config.bins == 0 ? num_samples + 1 : config.bins;
}

Verdict decide_verdict(double p_value_mc, double alpha, double valley, bool failed_trials) {
  if (p_value_mc < alpha) return Verdict::kFail;
  if (std::isinf(valley) || failed_trials) return Verdict::kInconclusive;
  return Verdict::kPass;
}

UniformityReport assess_slice(CountView counts, std::int64_t completed, const DiagnosticsConfig& config,
                              bool failed_trials, RandomStream& rng) {
  const auto num_samples = static_cast<std::int64_t>(counts.size()) - 1;
  const auto bins = effective_bins(config, num_samples);
  const Counts binned = bins == num_samples + 1 ? Counts(counts.begin(), counts.end()) : rebin(counts, bins);
  const auto chi = chi_square_uniformity(binned);
  UniformityReport report;
  report.chi2_stat = chi.stat;
  report.dof = chi.dof;
  report.p_value = chi.p_value;
  report.p_value_mc = mc_pvalue_impl(chi.stat, 1, completed, num_samples + 1, chi_square_stat(bins), config.mc_reps, rng);
  report.band_violations = ecdf_band_check(counts, config.alpha, config.mc_reps, rng);
  report.valley_score = valley_score(counts);
  report.verdict = decide_verdict(report.p_value_mc, config.alpha, report.valley_score, failed_trials);
  return report;
}

UniformityReport assess_pooled(const RankTally& tally, Pooling pooling, const DiagnosticsConfig& config,
                               std::uint64_t seed) {
  const auto bins = effective_bins(config, tally.num_samples());
  const auto pooled = pool_tally(tally, pooling);
  UniformityReport report;
  Counts combined(static_cast<std::size_t>(tally.num_bins()), 0);
  RandomStream band_rng(seed, stream_id::kBand);
  for (const auto& arr : pooled) {
    const Counts binned = bins == tally.num_bins() ? arr : rebin(arr, bins);
    const auto chi = chi_square_uniformity(binned);
    report.chi2_stat += chi.stat;
    report.dof += chi.dof;
    for (std::size_t r = 0; r < arr.size(); ++r) combined[r] += arr[r];
  }
  // Ranks are iid across trials only within a slice, so the band is checked slice by slice.
  for (Eigen::Index j = 0; j < tally.num_test(); ++j) {
    for (Eigen::Index i = 0; i < tally.num_outputs(); ++i) {
      report.band_violations += ecdf_band_check(tally.slice(j, i), config.alpha, config.mc_reps, band_rng);
    }
  }
  report.p_value = chi_square_upper_tail(report.chi2_stat, report.dof);
  RandomStream mc_rng(seed, stream_id::kDiagnostics);
  report.p_value_mc = mc_calibrated_pvalue(tally, pooling, chi_square_stat(bins), config.mc_reps, mc_rng);
  report.valley_score = valley_score(combined);
  report.verdict =
      decide_verdict(report.p_value_mc, config.alpha, report.valley_score, !tally.failed_trials().empty());
  return report;
}

}  // namespace gpsbc
