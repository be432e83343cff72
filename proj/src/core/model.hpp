// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kernel.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace gpsbc {

/// Independent Gaussian observation noise, one variance per output.
struct GaussianLikelihood {
  std::vector<double> noise_variance{0.1};

  friend bool operator==(const GaussianLikelihood&, const GaussianLikelihood&) = default;
};

struct ExactInference {
  friend bool operator==(const ExactInference&, const ExactInference&) = default;
};

struct SparseInference {
  InputPoints inducing;

  friend bool operator==(const SparseInference&, const SparseInference&) = default;
};

using Inference = std::variant<ExactInference, SparseInference>;

//---------------------------------------------------------------------------//
// Planted faults. Each one corrupts exactly one stage of the inference path.

/// Predictive variance loses the noise term it should contain.
struct NoNoiseInPredictiveVariance {
  friend bool operator==(const NoNoiseInPredictiveVariance&, const NoNoiseInPredictiveVariance&) = default;
};
/// Inference uses W^T where the prior used W.
struct TransposedMixingMatrix {
  friend bool operator==(const TransposedMixingMatrix&, const TransposedMixingMatrix&) = default;
};
/// The back-substitution of the mean solve uses G instead of G^T.
struct WrongTriangularSide {
  friend bool operator==(const WrongTriangularSide&, const WrongTriangularSide&) = default;
};
struct ScaledPosteriorVariance {
  double factor = 1.0;
  friend bool operator==(const ScaledPosteriorVariance&, const ScaledPosteriorVariance&) = default;
};
struct ShiftedPosteriorMean {
  double offset = 0.0;
  friend bool operator==(const ShiftedPosteriorMean&, const ShiftedPosteriorMean&) = default;
};

struct FaultSpec {
  std::variant<NoNoiseInPredictiveVariance, TransposedMixingMatrix, WrongTriangularSide,
               ScaledPosteriorVariance, ShiftedPosteriorMean>
      variant;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

/// Stable snake_case name of a fault, as used in config files.
std::string fault_name(const FaultSpec& fault);

//---------------------------------------------------------------------------//
/*!
 * Zero-mean GP prior + Gaussian likelihood + inference flavour, with at most
 * one planted fault. Immutable once constructed; the constructor validates.
 */
class GpModel {
 public:
  GpModel(KernelSpec kernel, GaussianLikelihood likelihood, Inference inference = ExactInference{},
          std::optional<FaultSpec> fault = std::nullopt);

  const KernelSpec& kernel() const noexcept { return kernel_; }
  const GaussianLikelihood& likelihood() const noexcept { return likelihood_; }
  const Inference& inference() const noexcept { return inference_; }
  const std::optional<FaultSpec>& fault() const noexcept { return fault_; }
  bool is_sparse() const noexcept { return std::holds_alternative<SparseInference>(inference_); }
  Eigen::Index output_dim() const noexcept { return output_dim_; }
  Eigen::Index input_dim() const noexcept { return input_dim_; }

  /// Copy of this model with a different fault (or none).
  GpModel with_fault(std::optional<FaultSpec> fault) const;
  /// Kernel the inference path sees; differs from kernel() only under TransposedMixingMatrix.
  KernelSpec inference_kernel() const;

 private:
  KernelSpec kernel_;
  GaussianLikelihood likelihood_;
  Inference inference_;
  std::optional<FaultSpec> fault_;
  Eigen::Index output_dim_ = 1;
  Eigen::Index input_dim_ = 1;
};

/// Gaussian over the m test points x p outputs, flattened output-major.
struct PosteriorGaussian {
  Vector mean;
  Matrix cov;
  Matrix chol;
  double jitter_used = 0.0;
  /// Diagonal entries clamped at the variance floor by a fault.
  int clamped_entries = 0;
};

struct PriorDraw {
  Matrix f;       // n x p at the training inputs
  Matrix f_star;  // m x p at the test inputs
};

/// One function drawn jointly at X and X* (a single Cholesky of the union).
PriorDraw sample_prior_joint(const GpModel& model, const InputPoints& x, const InputPoints& x_star,
                             RandomStream& rng);

/// y = f + eps with eps ~ N(0, noise_variance[i]) in column i.
Matrix simulate_observations(const Matrix& f, const GaussianLikelihood& lik, RandomStream& rng);

/// Exact GPR predictive for the latent function at X*.
PosteriorGaussian exact_posterior(const GpModel& model, const InputPoints& x, const Matrix& y,
                                  const InputPoints& x_star);

/// Closed-form optimal sparse variational predictive (inducing points from the model).
PosteriorGaussian sparse_posterior(const GpModel& model, const InputPoints& x, const Matrix& y,
                                   const InputPoints& x_star);

/// Dispatch on the model's inference flavour.
PosteriorGaussian posterior(const GpModel& model, const InputPoints& x, const Matrix& y,
                            const InputPoints& x_star);

/// L x (m p) matrix of independent draws.
Matrix sample_posterior(const PosteriorGaussian& post, Eigen::Index count, RandomStream& rng);

/*!
 * Apply a post-hoc fault to a correctly computed posterior and refresh the
 * cached factor. Faults that act earlier in the pipeline (transposed mixing,
 * wrong triangular side) pass through unchanged.
 *
 * `noise_variance` is the per-output noise used by NoNoiseInPredictiveVariance;
 * `num_test` is m, needed to map the flattened index to its output.
 */
PosteriorGaussian apply_fault(PosteriorGaussian post, const std::optional<FaultSpec>& fault,
                              const std::vector<double>& noise_variance, Eigen::Index num_test);

/// Smallest variance a fault may leave on the diagonal.
inline constexpr double kVarianceFloor = 1e-12;

//---------------------------------------------------------------------------//
// Type-II objective.

/*!
 * Log-hyperparameter layout for squared-exponential models:
 * [log signal_variance, log lengthscale_1..d, log noise_variance_1..p].
 */
struct HyperLayout {
  Eigen::Index input_dim = 1;
  Eigen::Index output_dim = 1;
  Eigen::Index size() const noexcept { return 1 + input_dim + output_dim; }
};

HyperLayout hyper_layout(const GpModel& model);
Vector log_hyperparameters(const GpModel& model);
/// Exact SE model with the given log-hyperparameters.
GpModel model_from_log_hyperparameters(const HyperLayout& layout, const Vector& theta);

struct LmlResult {
  double value = 0.0;
  Vector gradient;  // w.r.t. log-hyperparameters, HyperLayout order
};

/*!
 * Log marginal likelihood of y (n x p) under an exact squared-exponential
 * model, outputs treated as independent and summed, with the analytic
 * gradient. Set `with_gradient` false to skip the O(n^3) inverse.
 */
LmlResult log_marginal_likelihood(const GpModel& model, const InputPoints& x, const Matrix& y,
                                  bool with_gradient = true);

}  // namespace gpsbc
