// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <variant>
#include <vector>

#include "linalg.hpp"

namespace gpsbc {

struct KernelSpec;

/// k(x, x') = signal_variance * exp(-0.5 * sum_j (x_j - x'_j)^2 / lengthscale_j^2)
struct SquaredExponential {
  double signal_variance = 1.0;
  std::vector<double> lengthscales{0.5};

  friend bool operator==(const SquaredExponential&, const SquaredExponential&) = default;
};

/// q independent latent GPs mixed into p outputs through W (p x q).
struct LinearCoregionalization {
  std::vector<KernelSpec> latent_kernels;
  Matrix mixing;

  friend bool operator==(const LinearCoregionalization& a, const LinearCoregionalization& b);
};

struct SumKernel {
  std::vector<KernelSpec> terms;

  friend bool operator==(const SumKernel& a, const SumKernel& b);
};

/// Declarative covariance function. Validate with validate_kernel before use.
struct KernelSpec {
  std::variant<SquaredExponential, LinearCoregionalization, SumKernel> variant;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

KernelSpec make_se(double signal_variance, std::vector<double> lengthscales);
KernelSpec make_lmc(std::vector<KernelSpec> latents, Matrix mixing);
KernelSpec make_sum(std::vector<KernelSpec> terms);

/// Throws InvalidArgument when an invariant is violated.
void validate_kernel(const KernelSpec& spec);

Eigen::Index kernel_input_dim(const KernelSpec& spec);
Eigen::Index kernel_output_dim(const KernelSpec& spec);

/*!
 * Cross-covariance between the points of `a` and `b`.
 *
 * For a kernel with p outputs the result is (n_a p) x (n_b p), ordered
 * output-major: row index = output * n_a + point.
 */
Matrix eval_kernel(const KernelSpec& spec, const InputPoints& a, const InputPoints& b);

/// Same kernel with every coregionalization mixing matrix transposed.
KernelSpec transpose_mixing(const KernelSpec& spec);

/// True if some coregionalization matrix in `spec` is not symmetric.
bool has_asymmetric_mixing(const KernelSpec& spec);

}  // namespace gpsbc
