// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "diagnostics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"

namespace gpsbc {
namespace {

RankTally null_tally(Eigen::Index m, Eigen::Index p, std::int64_t l, std::int64_t n, RandomStream& rng) {
  RankTally t(m, p, l);
  std::vector<int> ranks(static_cast<std::size_t>(m * p));
  for (std::int64_t k = 0; k < n; ++k) {
    for (auto& r : ranks) r = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(l + 1)));
    t.add_trial(ranks);
  }
  return t;
}

//---------------------------------------------------------------------------//
// Chi-square

TEST(ChiSquareTail, FrozenValues) {
  struct Case {
    double stat, dof, expected;
  };
  const Case cases[] = {
      {4.605, 2, 0.10000850966145562},      {95.55, 100, 0.6072332936770948}, {143.38, 100, 0.0029236659486303893},
      {10, 3, 0.01856613546304325},         {0.5, 7, 0.9994464813904249},     {250, 100, 7.76693640353949e-15},
      {30, 19, 0.05179845889302389},
  };
  for (const auto& c : cases) {
    const double got = chi_square_upper_tail(c.stat, c.dof);
    EXPECT_NEAR(got / c.expected, 1.0, 1e-9) << c.stat << " " << c.dof;
  }
}

TEST(ChiSquareTail, AgreesWithBoost) {
  RandomStream rng(3, 0);
  for (int rep = 0; rep < 500; ++rep) {
    const double dof = 1 + static_cast<double>(rng.uniform_index(300));
    const double x = dof * 3.0 * rng.uniform();
    const double expected = boost::math::gamma_q(dof / 2, x / 2);
    const double got = chi_square_upper_tail(x, dof);
    if (expected > 1e-280) {
      EXPECT_NEAR(got / expected, 1.0, 1e-9) << x << " " << dof;
    } else {
      EXPECT_LT(got, 1e-270);
    }
  }
}

TEST(ChiSquareTail, EvenDofClosedForm) {
  for (int k = 1; k <= 30; k += 3) {
    for (double x : {0.3, 2.0, 11.0, 47.0}) {
      double term = 1.0, sum = 0.0;
      for (int j = 0; j < k; ++j) {
        sum += term;
        term *= (x / 2) / (j + 1);
      }
      EXPECT_NEAR(chi_square_upper_tail(x, 2 * k), std::exp(-x / 2) * sum, 1e-12) << k << " " << x;
    }
  }
}

TEST(ChiSquareTail, Edges) {
  EXPECT_EQ(chi_square_upper_tail(0.0, 5), 1.0);
  EXPECT_EQ(regularized_gamma_q(2.0, 0.0), 1.0);
  EXPECT_THROW(chi_square_upper_tail(1.0, 0), InvalidArgument);
}

TEST(ChiSquareUniformity, StatisticAndDof) {
  const Counts flat(8, 25);
  const auto a = chi_square_uniformity(flat);
  EXPECT_EQ(a.stat, 0.0);
  EXPECT_EQ(a.dof, 7);
  EXPECT_EQ(a.p_value, 1.0);

  // Everything in one bin: T(B - 1).
  Counts one(6, 0);
  one[2] = 40;
  EXPECT_NEAR(chi_square_uniformity(one).stat, 40.0 * 5, 1e-9);

  const Counts c{10, 20, 30};
  EXPECT_NEAR(chi_square_uniformity(c).stat, (100.0 + 0.0 + 100.0) / 20.0, 1e-12);
}

TEST(Rebin, SizesAndConservation) {
  Counts ones(101, 1);
  const auto sizes = rebin(ones, 20);
  ASSERT_EQ(sizes.size(), 20u);
  EXPECT_EQ(sizes[0], 6);
  for (std::size_t b = 1; b < 20; ++b) EXPECT_EQ(sizes[b], 5) << b;

  RandomStream rng(4, 0);
  Counts c(37);
  for (auto& v : c) v = static_cast<std::int64_t>(rng.uniform_index(100));
  for (std::int64_t b : {2, 5, 10, 37}) {
    const auto r = rebin(c, b);
    EXPECT_EQ(std::accumulate(r.begin(), r.end(), std::int64_t{0}), std::accumulate(c.begin(), c.end(), std::int64_t{0}));
  }
  EXPECT_THROW(rebin(c, 1), InvalidArgument);
  EXPECT_THROW(rebin(c, 38), InvalidArgument);
}

//---------------------------------------------------------------------------//
// Monte Carlo p-value

TEST(McPvalue, FloorIsOneOverRepsPlusOne) {
  RankTally t(1, 1, 9);
  for (int k = 0; k < 200; ++k) t.add_trial(std::vector<int>{0});
  RandomStream rng(5, 0);
  EXPECT_DOUBLE_EQ(mc_calibrated_pvalue(t, Pooling::kSingle, chi_square_stat(0), 999, rng), 1.0 / 1000);
}

TEST(McPvalue, AgreesWithAnalyticOnOneSlice) {
  RandomStream draw(6, 0);
  for (int rep = 0; rep < 5; ++rep) {
    const auto t = null_tally(1, 1, 19, 1000, draw);
    RandomStream rng(7, static_cast<std::uint64_t>(rep));
    const double mc = mc_calibrated_pvalue(t, Pooling::kSingle, chi_square_stat(0), 1999, rng);
    const double analytic = chi_square_uniformity(t.slice(0, 0)).p_value;
    EXPECT_NEAR(mc, analytic, 0.05) << rep;
  }
}

TEST(McPvalue, DeterministicGivenStream) {
  RandomStream draw(8, 0);
  const auto t = null_tally(3, 2, 9, 100, draw);
  RandomStream a(9, 1), b(9, 1);
  EXPECT_EQ(mc_calibrated_pvalue(t, Pooling::kPerOutput, chi_square_stat(0), 999, a),
            mc_calibrated_pvalue(t, Pooling::kPerOutput, chi_square_stat(0), 999, b));
}

// Under the null the Monte Carlo p-value is uniform; Kolmogorov-Smirnov at 1%.
TEST(McPvalue, UniformUnderNull) {
  RandomStream draw(10, 0);
  const int reps = 200;
  std::vector<double> ps;
  for (int r = 0; r < reps; ++r) {
    const auto t = null_tally(4, 1, 9, 60, draw);
    RandomStream rng(11, static_cast<std::uint64_t>(r));
    ps.push_back(mc_calibrated_pvalue(t, Pooling::kSingle, chi_square_stat(0), 999, rng));
  }
  std::sort(ps.begin(), ps.end());
  double d = 0.0;
  for (int i = 0; i < reps; ++i) {
    d = std::max({d, (i + 1.0) / reps - ps[i], ps[i] - double(i) / reps});
  }
  EXPECT_LT(d, 1.63 / std::sqrt(double(reps)));
}

//---------------------------------------------------------------------------//
// ECDF band

TEST(EcdfBand, FlatCountsStayInside) {
  RandomStream rng(12, 0);
  EXPECT_EQ(ecdf_band_check(Counts(101, 40), 0.01, 999, rng), 0);
}

TEST(EcdfBand, AllZeroIsTrivial) {
  RandomStream rng(13, 0);
  EXPECT_EQ(ecdf_band_check(Counts(21, 0), 0.01, 999, rng), 0);
}

// 4000 ranks over 101 bins: a first-bin count inside the pointwise 99%
// binomial interval [24, 57] cannot leave a wider simultaneous band; one far
// below it must.
TEST(EcdfBand, AgreesWithBinomialQuantiles) {
  auto with_first = [](std::int64_t first) {
    Counts c(101, 0);
    c[0] = first;
    std::int64_t rest = 4000 - first;
    for (std::size_t k = 1; k < 101; ++k) c[k] = rest / 100 + (static_cast<std::int64_t>(k) <= rest % 100 ? 1 : 0);
    return c;
  };
  RandomStream a(14, 0), b(14, 0);
  EXPECT_EQ(ecdf_band_check(with_first(40), 0.01, 999, a), 0);
  EXPECT_GT(ecdf_band_check(with_first(8), 0.01, 999, b), 0);
}

TEST(EcdfBand, WiderAlphaFlagsAtLeastAsMuch) {
  RandomStream draw(15, 0);
  Counts c(21);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = 40 + static_cast<std::int64_t>(k);  // gentle slope
  for (int seed = 0; seed < 5; ++seed) {
    RandomStream strict(16, seed), loose(16, seed);
    EXPECT_LE(ecdf_band_check(c, 0.01, 999, strict), ecdf_band_check(c, 0.2, 999, loose)) << seed;
  }
}

TEST(EcdfBand, FalseAlarmRateNearAlpha) {
  RandomStream draw(17, 0);
  int flagged = 0;
  const int reps = 300;
  for (int r = 0; r < reps; ++r) {
    const auto t = null_tally(1, 1, 19, 200, draw);
    RandomStream rng(18, static_cast<std::uint64_t>(r));
    flagged += ecdf_band_check(t.slice(0, 0), 0.05, 999, rng) > 0 ? 1 : 0;
  }
  // Expected about 15 of 300.
  EXPECT_LT(flagged, 30);
}

//---------------------------------------------------------------------------//
// Valley score

TEST(ValleyScore, Parabola) {
  Counts c(101);
  for (std::size_t r = 0; r < c.size(); ++r) c[r] = (static_cast<std::int64_t>(r) - 50) * (static_cast<std::int64_t>(r) - 50);
  EXPECT_NEAR(valley_score(c), 56.68636363636364, 1e-10);
}

TEST(ValleyScore, UniformIsOne) {
  for (std::size_t b : {3u, 10u, 20u, 101u}) EXPECT_DOUBLE_EQ(valley_score(Counts(b, 7)), 1.0) << b;
}

TEST(ValleyScore, MirrorSymmetric) {
  RandomStream rng(19, 0);
  for (int rep = 0; rep < 20; ++rep) {
    Counts c(31);
    for (auto& v : c) v = 1 + static_cast<std::int64_t>(rng.uniform_index(50));
    Counts m(c.rbegin(), c.rend());
    EXPECT_DOUBLE_EQ(valley_score(c), valley_score(m));
  }
}

TEST(ValleyScore, HumpBelowOneAndEmptyCentreInfinite) {
  Counts hump(21, 1);
  hump[10] = 50;
  EXPECT_LT(valley_score(hump), 1.0);
  Counts hole(21, 5);
  for (std::size_t k = 8; k <= 12; ++k) hole[k] = 0;
  EXPECT_TRUE(std::isinf(valley_score(hole)));
  EXPECT_THROW(valley_score(Counts(2, 1)), InvalidArgument);
  EXPECT_THROW(valley_score(Counts(10, 0)), InvalidArgument);
}

TEST(ValleyScore, NullQuantileAboveOne) {
  RandomStream rng(20, 0);
  const double q = null_valley_quantile(4000, 100, 0.05, 999, rng);
  EXPECT_GT(q, 1.0);
  EXPECT_LT(q, 1.5);
}

//---------------------------------------------------------------------------//
// Verdicts and reports

TEST(Verdict, Rules) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(decide_verdict(0.001, 0.01, 1.0, false), Verdict::kFail);
  EXPECT_EQ(decide_verdict(0.001, 0.01, inf, true), Verdict::kFail);
  EXPECT_EQ(decide_verdict(0.5, 0.01, 1.0, false), Verdict::kPass);
  EXPECT_EQ(decide_verdict(0.5, 0.01, inf, false), Verdict::kInconclusive);
  EXPECT_EQ(decide_verdict(0.5, 0.01, 1.0, true), Verdict::kInconclusive);
  EXPECT_EQ(decide_verdict(0.01, 0.01, 1.0, false), Verdict::kPass);
  EXPECT_EQ(to_string(Verdict::kInconclusive), "inconclusive");
}

TEST(DiagnosticsConfigValidation, Bounds) {
  DiagnosticsConfig c;
  EXPECT_NO_THROW(validate_diagnostics_config(c));
  c.alpha = 0.5;
  EXPECT_THROW(validate_diagnostics_config(c), InvalidArgument);
  c = {};
  c.mc_reps = 998;
  EXPECT_THROW(validate_diagnostics_config(c), InvalidArgument);
  c = {};
  c.bins = 1;
  EXPECT_THROW(validate_diagnostics_config(c), InvalidArgument);
  EXPECT_EQ(effective_bins(DiagnosticsConfig{}, 100), 101);
}

TEST(AssessPooled, NullPassesSkewedFails) {
  RandomStream draw(21, 0);
  const auto null = null_tally(3, 2, 19, 300, draw);
  DiagnosticsConfig cfg;
  cfg.mc_reps = 999;
  const auto ok = assess_pooled(null, Pooling::kSingle, cfg, 1);
  EXPECT_EQ(ok.verdict, Verdict::kPass);
  EXPECT_EQ(ok.dof, 19);

  RankTally skewed(3, 2, 19);
  for (int k = 0; k < 300; ++k) {
    std::vector<int> r(6);
    for (auto& v : r) v = static_cast<int>(draw.uniform_index(10)) * 2 % 20 == 0 ? 0 : static_cast<int>(draw.uniform_index(20));
    skewed.add_trial(r);
  }
  const auto bad = assess_pooled(skewed, Pooling::kPerOutput, cfg, 1);
  EXPECT_EQ(bad.verdict, Verdict::kFail);
  EXPECT_EQ(bad.dof, 38);
  EXPECT_DOUBLE_EQ(bad.p_value_mc, 1.0 / 1000);
}

TEST(AssessSlice, FailedTrialsMakeInconclusive) {
  RandomStream draw(22, 0);
  const auto t = null_tally(1, 1, 9, 500, draw);
  DiagnosticsConfig cfg;
  cfg.mc_reps = 999;
  RandomStream rng(23, 0);
  EXPECT_EQ(assess_slice(t.slice(0, 0), t.completed(), cfg, true, rng).verdict, Verdict::kInconclusive);
}

}  // namespace
}  // namespace gpsbc
