// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "error.hpp"
#include "oracles.hpp"

namespace gpsbc {
namespace {

using testing::fd_gradient;
using testing::joint_conditioning;
using testing::random_inputs;
using testing::random_matrix;
using testing::random_model;

InputPoints pts(std::initializer_list<double> xs) {
  Matrix v(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) v(i++, 0) = x;
  return InputPoints(v);
}

GpModel default_model(double noise = 0.1) { return GpModel(make_se(1.0, {0.5}), GaussianLikelihood{{noise}}); }

GpModel lmc_model(const Matrix& w, std::optional<FaultSpec> fault = std::nullopt) {
  return GpModel(make_lmc({make_se(1.0, {0.5}), make_se(0.5, {0.4})}, w), GaussianLikelihood{{0.1, 0.2}},
                 ExactInference{}, fault);
}

//---------------------------------------------------------------------------//
// Construction

TEST(GpModel, ValidatesOutputCounts) {
  EXPECT_THROW(GpModel(make_se(1.0, {0.5}), GaussianLikelihood{{0.1, 0.1}}), InvalidArgument);
  EXPECT_THROW(GpModel(make_se(1.0, {0.5}), GaussianLikelihood{{0.0}}), InvalidArgument);
  EXPECT_THROW(GpModel(make_se(1.0, {0.5}), GaussianLikelihood{{0.1}}, SparseInference{InputPoints::empty(1)}),
               InvalidArgument);
  EXPECT_THROW(default_model().with_fault(FaultSpec{ScaledPosteriorVariance{1.0}}), InvalidArgument);
  EXPECT_THROW(default_model().with_fault(FaultSpec{ShiftedPosteriorMean{0.0}}), InvalidArgument);
  EXPECT_THROW(default_model().with_fault(FaultSpec{TransposedMixingMatrix{}}), InvalidArgument);
}

//---------------------------------------------------------------------------//
// Prior draws and observations

TEST(SamplePriorJoint, EmptyTestSet) {
  RandomStream rng(1, 0);
  const auto draw = sample_prior_joint(default_model(), pts({0.0, 0.5}), InputPoints::empty(1), rng);
  EXPECT_EQ(draw.f.rows(), 2);
  EXPECT_EQ(draw.f_star.rows(), 0);
}

TEST(SamplePriorJoint, SamePointsSameValues) {
  RandomStream rng(2, 0);
  const auto x = pts({0.1, 0.4, 0.8});
  const auto draw = sample_prior_joint(default_model(), x, x, rng);
  EXPECT_EQ(draw.f, draw.f_star);
}

TEST(SamplePriorJoint, MarginalVarianceIsSignalVariance) {
  RandomStream rng(3, 0);
  const int n = 100000;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_prior_joint(default_model(), pts({0.3}), pts({0.7}), rng);
    sq += d.f(0, 0) * d.f(0, 0);
  }
  EXPECT_LT(std::abs(sq / n - 1.0), 5.0 * std::sqrt(2.0 / n));
}

TEST(SimulateObservations, TinyNoiseKeepsValues) {
  RandomStream rng(4, 0);
  const Matrix f = random_matrix(5, 1, rng);
  const Matrix y = simulate_observations(f, GaussianLikelihood{{1e-12}}, rng);
  EXPECT_LT((y - f).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(SimulateObservations, PerOutputNoise) {
  RandomStream rng(5, 0);
  const int n = 100000;
  const Matrix y = simulate_observations(Matrix::Zero(n, 2), GaussianLikelihood{{0.1, 2.5}}, rng);
  const Eigen::RowVectorXd var = y.array().square().colwise().mean();
  EXPECT_LT(std::abs(var(0) - 0.1), 5 * 0.1 * std::sqrt(2.0 / n));
  EXPECT_LT(std::abs(var(1) - 2.5), 5 * 2.5 * std::sqrt(2.0 / n));
}

//---------------------------------------------------------------------------//
// Exact posterior

TEST(ExactPosterior, MatchesJointConditioningOracle) {
  RandomStream rng(6, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.uniform_index(5));
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.uniform_index(5));
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform_index(2));
    const auto model = random_model(d, rep % 2 == 1, rng);
    const auto x = random_inputs(n, d, rng);
    const auto xs = random_inputs(m, d, rng);
    const Matrix y = random_matrix(n, model.output_dim(), rng);
    const auto post = exact_posterior(model, x, y, xs);
    const auto [mean, cov] = joint_conditioning(model, x, y, xs);
    ASSERT_LT((post.mean - mean).cwiseAbs().maxCoeff(), 1e-8) << "rep " << rep;
    ASSERT_LT((post.cov - cov).cwiseAbs().maxCoeff(), 1e-8) << "rep " << rep;
  }
}

// numpy reference (tools/oracles/frozen_values.py)
TEST(ExactPosterior, FrozenReference) {
  const GpModel model(make_se(1.3, {0.7}), GaussianLikelihood{{0.2}});
  Matrix y(6, 1);
  y << 0.3, -0.2, 0.8, 1.1, -0.4, 0.5;
  const auto post = exact_posterior(model, pts({0.0, 0.4, 0.9, 1.5, 2.2, 3.0}), y, pts({0.7, 2.0}));
  EXPECT_NEAR(post.mean(0), 0.41641011259291144, 1e-12);
  EXPECT_NEAR(post.mean(1), 0.09792431296966272, 1e-12);
  EXPECT_NEAR(post.cov(0, 0), 0.11275940704407517, 1e-12);
  EXPECT_NEAR(post.cov(0, 1), -0.014071752062659204, 1e-12);
  EXPECT_NEAR(post.cov(1, 1), 0.1426435425742183, 1e-12);
}

TEST(ExactPosterior, NearInterpolation) {
  Matrix y(3, 1);
  y << 0.5, -1.0, 0.25;
  const auto x = pts({0.0, 0.6, 1.3});
  const auto post = exact_posterior(default_model(1e-12), x, y, pts({0.6, 1.3}));
  EXPECT_NEAR(post.mean(0), -1.0, 1e-4);
  EXPECT_NEAR(post.mean(1), 0.25, 1e-4);
  EXPECT_LT(post.cov.diagonal().maxCoeff(), 1e-4);
}

TEST(ExactPosterior, FarAwayRevertsToPrior) {
  Matrix y(2, 1);
  y << 1.0, -2.0;
  const auto post = exact_posterior(default_model(), pts({0.0, 0.3}), y, pts({50.0}));
  EXPECT_LT(std::abs(post.mean(0)), 1e-6);
  EXPECT_NEAR(post.cov(0, 0), 1.0, 1e-6);
}

TEST(ExactPosterior, NoTrainingDataIsThePrior) {
  const auto xs = pts({0.2, 0.9});
  const auto post = exact_posterior(default_model(), InputPoints::empty(1), Matrix(0, 1), xs);
  EXPECT_EQ(post.mean, Vector::Zero(2));
  EXPECT_LT((post.cov - eval_kernel(make_se(1.0, {0.5}), xs, xs)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ExactPosterior, VarianceNeverExceedsPrior) {
  RandomStream rng(7, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto model = random_model(1, false, rng);
    const auto x = random_inputs(6, 1, rng);
    const auto xs = random_inputs(4, 1, rng);
    const auto post = exact_posterior(model, x, random_matrix(6, 1, rng), xs);
    const Vector prior = eval_kernel(model.kernel(), xs, xs).diagonal();
    EXPECT_TRUE((post.cov.diagonal().array() <= prior.array() + 1e-10).all());
  }
}

TEST(ExactPosterior, IdentityMixingDecouplesOutputs) {
  RandomStream rng(8, 0);
  const auto model = lmc_model(Matrix::Identity(2, 2));
  const auto x = random_inputs(5, 1, rng);
  const auto xs = random_inputs(3, 1, rng);
  Matrix y = random_matrix(5, 2, rng);
  const auto a = exact_posterior(model, x, y, xs);
  y.col(1) += random_matrix(5, 1, rng);
  const auto b = exact_posterior(model, x, y, xs);
  EXPECT_LT((a.mean.head(3) - b.mean.head(3)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((a.cov.topLeftCorner(3, 3) - b.cov.topLeftCorner(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GT((a.mean.tail(3) - b.mean.tail(3)).cwiseAbs().maxCoeff(), 1e-6);
}

//---------------------------------------------------------------------------//
// Sparse posterior

TEST(SparsePosterior, FrozenReference) {
  const GpModel model(make_se(1.3, {0.7}), GaussianLikelihood{{0.2}}, SparseInference{pts({0.2, 1.4, 2.6})});
  Matrix y(6, 1);
  y << 0.3, -0.2, 0.8, 1.1, -0.4, 0.5;
  const auto post = sparse_posterior(model, pts({0.0, 0.4, 0.9, 1.5, 2.2, 3.0}), y, pts({0.7, 2.0}));
  EXPECT_NEAR(post.mean(0), 0.4295156842508598, 1e-10);
  EXPECT_NEAR(post.mean(1), 0.44470498221780014, 1e-10);
  EXPECT_NEAR(post.cov(0, 0), 0.318065134678107, 1e-10);
  EXPECT_NEAR(post.cov(0, 1), -0.13391509910561786, 1e-10);
  EXPECT_NEAR(post.cov(1, 1), 0.3499875979057062, 1e-10);
}

TEST(SparsePosterior, InducingAtDataCollapsesToExact) {
  RandomStream rng(9, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto base = random_model(1 + rep % 2, rep % 3 == 0, rng);
    const auto x = random_inputs(5, base.input_dim(), rng);
    const auto xs = random_inputs(3, base.input_dim(), rng);
    const Matrix y = random_matrix(5, base.output_dim(), rng);
    const GpModel sparse(base.kernel(), base.likelihood(), SparseInference{x});
    const auto a = sparse_posterior(sparse, x, y, xs);
    const auto b = exact_posterior(base, x, y, xs);
    ASSERT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-6) << "rep " << rep;
    ASSERT_LT((a.cov - b.cov).cwiseAbs().maxCoeff(), 1e-6) << "rep " << rep;
  }
}

TEST(SparsePosterior, SingleInducingPointInterpolates) {
  Matrix y(1, 1);
  y << 0.8;
  const GpModel model(make_se(1.0, {0.5}), GaussianLikelihood{{1e-10}}, SparseInference{pts({0.3})});
  const auto post = sparse_posterior(model, pts({0.3}), y, pts({0.3}));
  EXPECT_NEAR(post.mean(0), 0.8, 1e-6);
  EXPECT_LT(post.cov(0, 0), 1e-6);
}

// The sparse predictive is exact conditioning under the projected prior
// Q = K_xz K_zz^-1 K_zx for the data, with the full K at the test points.
TEST(SparsePosterior, MatchesProjectedPriorConditioning) {
  RandomStream rng(10, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto base = random_model(1 + rep % 2, false, rng);
    const Eigen::Index d = base.input_dim();
    const auto x = random_inputs(8, d, rng);
    const auto z = random_inputs(3, d, rng);
    const auto xs = random_inputs(4, d, rng);
    const Matrix y = random_matrix(8, 1, rng);
    const auto post = sparse_posterior(GpModel(base.kernel(), base.likelihood(), SparseInference{z}), x, y, xs);

    const Eigen::FullPivLU<Matrix> kzz(eval_kernel(base.kernel(), z, z));
    const Matrix kzx = eval_kernel(base.kernel(), z, x);
    const Matrix kzs = eval_kernel(base.kernel(), z, xs);
    Matrix qxx = kzx.transpose() * kzz.solve(kzx);
    qxx.diagonal().array() += base.likelihood().noise_variance[0];
    const Matrix qsx = kzs.transpose() * kzz.solve(kzx);
    const Eigen::FullPivLU<Matrix> lu(qxx);
    const Vector mean = qsx * lu.solve(y);
    const Matrix cov = eval_kernel(base.kernel(), xs, xs) - qsx * lu.solve(Matrix(qsx.transpose()));
    ASSERT_LT((post.mean - mean).cwiseAbs().maxCoeff(), 1e-7) << "rep " << rep;
    ASSERT_LT((post.cov - cov).cwiseAbs().maxCoeff(), 1e-7) << "rep " << rep;
  }
}

TEST(SparsePosterior, IdentityMixingMatchesPerOutputModels) {
  RandomStream rng(17, 0);
  const auto k1 = make_se(1.0, {0.5});
  const auto k2 = make_se(0.5, {0.4});
  const auto z = InputPoints::linspace(0.0, 1.0, 5);
  const GpModel joint(make_lmc({k1, k2}, Matrix::Identity(2, 2)), GaussianLikelihood{{0.1, 0.3}}, SparseInference{z});
  const auto x = random_inputs(8, 1, rng, 1.0);
  const auto xs = random_inputs(4, 1, rng, 1.0);
  const Matrix y = random_matrix(8, 2, rng);
  const auto post = sparse_posterior(joint, x, y, xs);
  const auto a = sparse_posterior(GpModel(k1, GaussianLikelihood{{0.1}}, SparseInference{z}), x, y.col(0), xs);
  const auto b = sparse_posterior(GpModel(k2, GaussianLikelihood{{0.3}}, SparseInference{z}), x, y.col(1), xs);
  EXPECT_LT((post.mean.head(4) - a.mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((post.mean.tail(4) - b.mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((post.cov.topLeftCorner(4, 4) - a.cov).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((post.cov.bottomRightCorner(4, 4) - b.cov).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(post.cov.topRightCorner(4, 4).cwiseAbs().maxCoeff(), 1e-12);
}

// The projected prior treats the inducing summary as exact, so the sparse
// variance is not an upper bound on the exact one. A test point sitting on
// the only inducing point, with one nearby observation, shows it.
TEST(SparsePosterior, VarianceCanFallBelowExact) {
  const auto kernel = make_se(1.0, {0.5});
  Matrix y(1, 1);
  y << 0.4;
  const auto x = pts({0.4});
  const auto xs = pts({0.0});
  const auto sparse = sparse_posterior(GpModel(kernel, GaussianLikelihood{{0.1}}, SparseInference{xs}), x, y, xs);
  const auto exact = exact_posterior(GpModel(kernel, GaussianLikelihood{{0.1}}), x, y, xs);
  EXPECT_LT(sparse.cov(0, 0), exact.cov(0, 0) - 1e-3);
}

//---------------------------------------------------------------------------//
// Posterior sampling and faults

TEST(SamplePosterior, ZeroCovarianceGivesMean) {
  PosteriorGaussian post{Vector::LinSpaced(3, 0.0, 1.0), Matrix::Zero(3, 3), Matrix::Zero(3, 3)};
  RandomStream rng(11, 0);
  const Matrix s = sample_posterior(post, 5, rng);
  for (Eigen::Index k = 0; k < 5; ++k) EXPECT_EQ(Vector(s.row(k).transpose()), post.mean);
  EXPECT_EQ(sample_posterior(post, 1, rng).rows(), 1);
  EXPECT_EQ(sample_posterior(post, 1, rng).cols(), 3);
}

TEST(SamplePosterior, EmpiricalCovariance) {
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  PosteriorGaussian post{Vector::Zero(2), cov, cholesky_with_jitter(cov).factor};
  RandomStream rng(12, 0);
  const int n = 100000;
  const Matrix s = sample_posterior(post, n, rng);
  const Matrix emp = s.transpose() * s / n;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      EXPECT_LT(std::abs(emp(i, j) - cov(i, j)), 5 * std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n));
}

PosteriorGaussian unit_posterior(Eigen::Index dim) {
  return PosteriorGaussian{Vector::Zero(dim), Matrix::Identity(dim, dim), Matrix::Identity(dim, dim)};
}

TEST(ApplyFault, NoneIsIdentity) {
  const auto post = unit_posterior(3);
  const auto out = apply_fault(post, std::nullopt, {0.1}, 3);
  EXPECT_EQ(out.mean, post.mean);
  EXPECT_EQ(out.cov, post.cov);
}

TEST(ApplyFault, ScaledVariance) {
  const auto out = apply_fault(unit_posterior(3), FaultSpec{ScaledPosteriorVariance{0.25}}, {0.1}, 3);
  EXPECT_EQ(out.cov, 0.25 * Matrix::Identity(3, 3));
  EXPECT_EQ(out.mean, Vector::Zero(3));
}

TEST(ApplyFault, ShiftedMean) {
  const auto out = apply_fault(unit_posterior(3), FaultSpec{ShiftedPosteriorMean{1.0}}, {0.1}, 3);
  EXPECT_EQ(out.mean, Vector::Ones(3));
  EXPECT_EQ(out.cov, Matrix::Identity(3, 3));
}

TEST(ApplyFault, NoNoiseClampsAtFloor) {
  auto post = unit_posterior(4);
  post.cov.diagonal() << 0.05, 0.5, 0.05, 0.5;
  // two outputs, two test points each; noise 0.1 and 0.2
  const auto out = apply_fault(post, FaultSpec{NoNoiseInPredictiveVariance{}}, {0.1, 0.2}, 2);
  EXPECT_EQ(out.cov(0, 0), kVarianceFloor);
  EXPECT_NEAR(out.cov(1, 1), 0.4, 1e-15);
  EXPECT_EQ(out.cov(2, 2), kVarianceFloor);
  EXPECT_NEAR(out.cov(3, 3), 0.3, 1e-15);
  EXPECT_EQ(out.clamped_entries, 2);
  EXPECT_TRUE((out.cov.diagonal().array() > 0.0).all());
}

TEST(Faults, TransposedMixingChangesPredictive) {
  Matrix w(2, 2);
  w << 1.0, 0.8, -0.2, 1.0;
  RandomStream rng(13, 0);
  const auto x = random_inputs(5, 1, rng);
  const auto xs = random_inputs(3, 1, rng);
  const Matrix y = random_matrix(5, 2, rng);
  const auto clean = exact_posterior(lmc_model(w), x, y, xs);
  const auto bad = exact_posterior(lmc_model(w, FaultSpec{TransposedMixingMatrix{}}), x, y, xs);
  EXPECT_GT((clean.mean - bad.mean).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Faults, WrongTriangularSideChangesMean) {
  RandomStream rng(14, 0);
  const auto x = random_inputs(5, 1, rng);
  const Matrix y = random_matrix(5, 1, rng);
  const auto xs = random_inputs(2, 1, rng);
  const auto clean = exact_posterior(default_model(), x, y, xs);
  const auto bad = exact_posterior(default_model().with_fault(FaultSpec{WrongTriangularSide{}}), x, y, xs);
  EXPECT_GT((clean.mean - bad.mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((clean.cov - bad.cov).cwiseAbs().maxCoeff(), 1e-12);
}

//---------------------------------------------------------------------------//
// Log marginal likelihood

TEST(LogMarginalLikelihood, SinglePointClosedForm) {
  // K + noise = [[1]] with signal 0.5 and noise 0.5
  const GpModel model(make_se(0.5, {1.0}), GaussianLikelihood{{0.5}});
  const auto r = log_marginal_likelihood(model, pts({0.0}), Matrix::Zero(1, 1));
  EXPECT_NEAR(r.value, -0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(r.value, -0.9189, 5e-5);
}

TEST(LogMarginalLikelihood, FrozenReference) {
  const GpModel model(make_se(1.3, {0.7}), GaussianLikelihood{{0.2}});
  Matrix y(6, 1);
  y << 0.3, -0.2, 0.8, 1.1, -0.4, 0.5;
  EXPECT_NEAR(log_marginal_likelihood(model, pts({0.0, 0.4, 0.9, 1.5, 2.2, 3.0}), y).value, -7.224138468216361, 1e-11);
}

TEST(LogMarginalLikelihood, GradientMatchesFiniteDifferences) {
  RandomStream rng(15, 0);
  for (int rep = 0; rep < 60; ++rep) {
    const Eigen::Index d = 1 + rep % 2;
    std::vector<double> ls;
    for (Eigen::Index j = 0; j < d; ++j) ls.push_back(0.3 + rng.uniform());
    const GpModel model(make_se(0.5 + rng.uniform(), ls), GaussianLikelihood{{0.05 + 0.5 * rng.uniform()}});
    const auto x = random_inputs(6, d, rng);
    const Matrix y = random_matrix(6, 1, rng);
    const Vector g = log_marginal_likelihood(model, x, y).gradient;
    const Vector fd = fd_gradient(model, x, y);
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      EXPECT_LT(std::abs(g(k) - fd(k)), 1e-4 * std::max(1.0, std::abs(fd(k)))) << "rep " << rep << " coord " << k;
    }
  }
}

TEST(LogMarginalLikelihood, ScaleIdentity) {
  RandomStream rng(16, 0);
  const auto x = random_inputs(7, 1, rng);
  const Matrix y = random_matrix(7, 1, rng);
  const double c = 2.7;
  const GpModel a(make_se(0.9, {0.6}), GaussianLikelihood{{0.3}});
  const GpModel b(make_se(0.9 * c * c, {0.6}), GaussianLikelihood{{0.3 * c * c}});
  const double la = log_marginal_likelihood(a, x, y, false).value;
  const double lb = log_marginal_likelihood(b, x, c * y, false).value;
  EXPECT_NEAR(lb - la, -7.0 * std::log(c), 1e-10);
}

TEST(LogMarginalLikelihood, RejectsNonSquaredExponential) {
  EXPECT_THROW(hyper_layout(lmc_model(Matrix::Identity(2, 2))), InvalidArgument);
}

TEST(LogHyperparameters, RoundTrip) {
  const GpModel model(make_se(1.7, {0.4, 2.2}), GaussianLikelihood{{0.05}});
  const auto layout = hyper_layout(model);
  EXPECT_EQ(layout.size(), 4);
  const auto back = model_from_log_hyperparameters(layout, log_hyperparameters(model));
  EXPECT_NEAR(std::get<SquaredExponential>(back.kernel().variant).signal_variance, 1.7, 1e-14);
  EXPECT_NEAR(std::get<SquaredExponential>(back.kernel().variant).lengthscales[1], 2.2, 1e-14);
  EXPECT_NEAR(back.likelihood().noise_variance[0], 0.05, 1e-16);
}

}  // namespace
}  // namespace gpsbc
