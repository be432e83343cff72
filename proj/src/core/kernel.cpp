// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "kernel.hpp"

#include <cmath>
#include <string>

#include "error.hpp"

namespace gpsbc {

bool operator==(const LinearCoregionalization& a, const LinearCoregionalization& b) {
  return a.latent_kernels == b.latent_kernels && a.mixing.rows() == b.mixing.rows() &&
         a.mixing.cols() == b.mixing.cols() && a.mixing == b.mixing;
}

bool operator==(const SumKernel& a, const SumKernel& b) { return a.terms == b.terms; }

KernelSpec make_se(double signal_variance, std::vector<double> lengthscales) {
  return KernelSpec{SquaredExponential{signal_variance, std::move(lengthscales)}};
}

KernelSpec make_lmc(std::vector<KernelSpec> latents, Matrix mixing) {
  return KernelSpec{LinearCoregionalization{std::move(latents), std::move(mixing)}};
}

KernelSpec make_sum(std::vector<KernelSpec> terms) { return KernelSpec{SumKernel{std::move(terms)}}; }

namespace {

bool contains_lmc(const KernelSpec& spec) {
  if (std::holds_alternative<LinearCoregionalization>(spec.variant)) return true;
  if (const auto* sum = std::get_if<SumKernel>(&spec.variant)) {
    for (const auto& t : sum->terms) {
      if (contains_lmc(t)) return true;
    }
  }
  return false;
}

void validate_impl(const KernelSpec& spec) {
  if (const auto* se = std::get_if<SquaredExponential>(&spec.variant)) {
    if (!(se->signal_variance > 0.0) || !std::isfinite(se->signal_variance)) {
      throw InvalidArgument("squared exponential: signal_variance must be > 0");
    }
    if (se->lengthscales.empty()) throw InvalidArgument("squared exponential: lengthscales must be nonempty");
    for (double l : se->lengthscales) {
      if (!(l > 0.0) || !std::isfinite(l)) throw InvalidArgument("squared exponential: every lengthscale must be > 0");
    }
  } else if (const auto* lmc = std::get_if<LinearCoregionalization>(&spec.variant)) {
    if (lmc->latent_kernels.empty()) throw InvalidArgument("coregionalization: need at least one latent kernel");
    if (lmc->mixing.cols() != static_cast<Eigen::Index>(lmc->latent_kernels.size())) {
      throw InvalidArgument("coregionalization: mixing matrix needs one column per latent kernel");
    }
    if (lmc->mixing.rows() < 1) throw InvalidArgument("coregionalization: mixing matrix has no rows");
    if (!lmc->mixing.allFinite()) throw InvalidArgument("coregionalization: mixing matrix is not finite");
    for (Eigen::Index i = 0; i < lmc->mixing.rows(); ++i) {
      if ((lmc->mixing.row(i).array() == 0.0).all()) {
        throw InvalidArgument("coregionalization: mixing row " + std::to_string(i) + " is all zero");
      }
    }
    for (const auto& latent : lmc->latent_kernels) {
      if (contains_lmc(latent)) throw InvalidArgument("coregionalization: nested coregionalization is not allowed");
      validate_impl(latent);
    }
    const auto d = kernel_input_dim(lmc->latent_kernels.front());
    for (const auto& latent : lmc->latent_kernels) {
      if (kernel_input_dim(latent) != d) throw InvalidArgument("coregionalization: latent input dims differ");
    }
  } else {
    const auto& sum = std::get<SumKernel>(spec.variant);
    if (sum.terms.empty()) throw InvalidArgument("sum kernel: need at least one term");
    for (const auto& t : sum.terms) validate_impl(t);
    const auto d = kernel_input_dim(sum.terms.front());
    const auto p = kernel_output_dim(sum.terms.front());
    for (const auto& t : sum.terms) {
      if (kernel_input_dim(t) != d || kernel_output_dim(t) != p) {
        throw InvalidArgument("sum kernel: terms disagree on input or output dimension");
      }
    }
  }
}

Matrix eval_se(const SquaredExponential& se, const InputPoints& a, const InputPoints& b) {
  const Eigen::Index d = a.dim();
  if (static_cast<Eigen::Index>(se.lengthscales.size()) != d) {
    throw DimensionMismatch("squared exponential: lengthscale count does not match input dimension");
  }
  Eigen::RowVectorXd inv_l(d);
  for (Eigen::Index j = 0; j < d; ++j) inv_l(j) = 1.0 / se.lengthscales[static_cast<std::size_t>(j)];
  const Matrix sa = a.values().array().rowwise() * inv_l.array();
  const Matrix sb = b.values().array().rowwise() * inv_l.array();
  Matrix k(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      k(i, j) = se.signal_variance * std::exp(-0.5 * (sa.row(i) - sb.row(j)).squaredNorm());
    }
  }
  return k;
}

}  // namespace

void validate_kernel(const KernelSpec& spec) { validate_impl(spec); }

Eigen::Index kernel_input_dim(const KernelSpec& spec) {
  if (const auto* se = std::get_if<SquaredExponential>(&spec.variant)) {
    return static_cast<Eigen::Index>(se->lengthscales.size());
  }
  if (const auto* lmc = std::get_if<LinearCoregionalization>(&spec.variant)) {
    return lmc->latent_kernels.empty() ? 0 : kernel_input_dim(lmc->latent_kernels.front());
  }
  const auto& sum = std::get<SumKernel>(spec.variant);
  return sum.terms.empty() ? 0 : kernel_input_dim(sum.terms.front());
}

Eigen::Index kernel_output_dim(const KernelSpec& spec) {
  if (std::holds_alternative<SquaredExponential>(spec.variant)) return 1;
  if (const auto* lmc = std::get_if<LinearCoregionalization>(&spec.variant)) return lmc->mixing.rows();
  const auto& sum = std::get<SumKernel>(spec.variant);
  return sum.terms.empty() ? 1 : kernel_output_dim(sum.terms.front());
}

Matrix eval_kernel(const KernelSpec& spec, const InputPoints& a, const InputPoints& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("eval_kernel: inputs have different dimensions");
  if (a.dim() != kernel_input_dim(spec)) throw DimensionMismatch("eval_kernel: kernel/input dimension mismatch");
  if (const auto* se = std::get_if<SquaredExponential>(&spec.variant)) return eval_se(*se, a, b);

  const Eigen::Index na = a.size();
  const Eigen::Index nb = b.size();
  if (const auto* lmc = std::get_if<LinearCoregionalization>(&spec.variant)) {
    const Eigen::Index p = lmc->mixing.rows();
    Matrix k = Matrix::Zero(na * p, nb * p);
    for (std::size_t q = 0; q < lmc->latent_kernels.size(); ++q) {
      const Matrix kq = eval_kernel(lmc->latent_kernels[q], a, b);
      const auto w = lmc->mixing.col(static_cast<Eigen::Index>(q));
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index i2 = 0; i2 < p; ++i2) {
          const double coef = w(i) * w(i2);
          if (coef != 0.0) k.block(i * na, i2 * nb, na, nb) += coef * kq;
        }
      }
    }
    return k;
  }
  const auto& sum = std::get<SumKernel>(spec.variant);
  Matrix k = eval_kernel(sum.terms.front(), a, b);
  for (std::size_t t = 1; t < sum.terms.size(); ++t) k += eval_kernel(sum.terms[t], a, b);
  return k;
}

KernelSpec transpose_mixing(const KernelSpec& spec) {
  if (const auto* lmc = std::get_if<LinearCoregionalization>(&spec.variant)) {
    if (lmc->mixing.rows() != lmc->mixing.cols()) {
      throw InvalidArgument("transposed mixing requires a square mixing matrix");
    }
    return make_lmc(lmc->latent_kernels, lmc->mixing.transpose());
  }
  if (const auto* sum = std::get_if<SumKernel>(&spec.variant)) {
    std::vector<KernelSpec> terms;
    for (const auto& t : sum->terms) terms.push_back(transpose_mixing(t));
    return make_sum(std::move(terms));
  }
  return spec;
}

bool has_asymmetric_mixing(const KernelSpec& spec) {
  if (const auto* lmc = std::get_if<LinearCoregionalization>(&spec.variant)) {
    return lmc->mixing.rows() == lmc->mixing.cols() && lmc->mixing != lmc->mixing.transpose();
  }
  if (const auto* sum = std::get_if<SumKernel>(&spec.variant)) {
    for (const auto& t : sum->terms) {
      if (has_asymmetric_mixing(t)) return true;
    }
  }
  return false;
}

}  // namespace gpsbc
