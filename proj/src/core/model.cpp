// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <cmath>
#include <numbers>

#include "error.hpp"

namespace gpsbc {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool contains_lmc(const KernelSpec& spec) {
  if (std::holds_alternative<LinearCoregionalization>(spec.variant)) return true;
  if (const auto* sum = std::get_if<SumKernel>(&spec.variant)) {
    for (const auto& t : sum->terms) {
      if (contains_lmc(t)) return true;
    }
  }
  return false;
}

/// Stack the columns of an n x p matrix: index = output * n + point.
Vector flatten_output_major(const Matrix& y) {
  return Eigen::Map<const Vector>(y.data(), y.size());
}

/// Per-row noise of the output-major flattening of n points.
Vector noise_diagonal(const GaussianLikelihood& lik, Eigen::Index n) {
  const auto p = static_cast<Eigen::Index>(lik.noise_variance.size());
  Vector diag(n * p);
  for (Eigen::Index i = 0; i < p; ++i) diag.segment(i * n, n).setConstant(lik.noise_variance[static_cast<std::size_t>(i)]);
  return diag;
}

bool has_fault(const GpModel& model, auto tag) {
  return model.fault() && std::holds_alternative<decltype(tag)>(model.fault()->variant);
}

void check_shapes(const GpModel& model, const InputPoints& x, const Matrix& y, const InputPoints& x_star) {
  if (x.dim() != model.input_dim() || x_star.dim() != model.input_dim()) {
    throw DimensionMismatch("posterior: input dimension does not match the kernel");
  }
  if (y.rows() != x.size() || y.cols() != model.output_dim()) {
    throw DimensionMismatch("posterior: observations must be n x p");
  }
}

}  // namespace

std::string fault_name(const FaultSpec& fault) {
  return std::visit(Overloaded{
                        [](const NoNoiseInPredictiveVariance&) { return std::string("no_noise_in_predictive_variance"); },
                        [](const TransposedMixingMatrix&) { return std::string("transposed_mixing_matrix"); },
                        [](const WrongTriangularSide&) { return std::string("wrong_triangular_side"); },
                        [](const ScaledPosteriorVariance&) { return std::string("scaled_posterior_variance"); },
                        [](const ShiftedPosteriorMean&) { return std::string("shifted_posterior_mean"); },
                    },
                    fault.variant);
}

GpModel::GpModel(KernelSpec kernel, GaussianLikelihood likelihood, Inference inference,
                 std::optional<FaultSpec> fault)
    : kernel_(std::move(kernel)),
      likelihood_(std::move(likelihood)),
      inference_(std::move(inference)),
      fault_(std::move(fault)) {
  validate_kernel(kernel_);
  output_dim_ = kernel_output_dim(kernel_);
  input_dim_ = kernel_input_dim(kernel_);
  if (static_cast<Eigen::Index>(likelihood_.noise_variance.size()) != output_dim_) {
    throw InvalidArgument("likelihood: need one noise variance per output (" + std::to_string(output_dim_) + ")");
  }
  for (double v : likelihood_.noise_variance) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("likelihood: noise variances must be > 0");
  }
  if (const auto* sparse = std::get_if<SparseInference>(&inference_)) {
    if (sparse->inducing.size() < 1) throw InvalidArgument("sparse inference: inducing points must be nonempty");
    if (sparse->inducing.dim() != input_dim_) {
      throw InvalidArgument("sparse inference: inducing points have the wrong input dimension");
    }
  }
  if (fault_) {
    std::visit(Overloaded{
                   [](const ScaledPosteriorVariance& f) {
                     if (!(f.factor > 0.0) || !std::isfinite(f.factor) || f.factor == 1.0) {
                       throw InvalidArgument("fault scaled_posterior_variance: factor must be positive and != 1");
                     }
                   },
                   [](const ShiftedPosteriorMean& f) {
                     if (!std::isfinite(f.offset) || f.offset == 0.0) {
                       throw InvalidArgument("fault shifted_posterior_mean: offset must be finite and != 0");
                     }
                   },
                   [this](const TransposedMixingMatrix&) {
                     if (!contains_lmc(kernel_)) {
                       throw InvalidArgument("fault transposed_mixing_matrix needs a coregionalization kernel");
                     }
                     (void)transpose_mixing(kernel_);
                   },
                   [](const auto&) {},
               },
               fault_->variant);
  }
}

GpModel GpModel::with_fault(std::optional<FaultSpec> fault) const {
  return GpModel(kernel_, likelihood_, inference_, std::move(fault));
}

KernelSpec GpModel::inference_kernel() const {
  if (has_fault(*this, TransposedMixingMatrix{})) return transpose_mixing(kernel_);
  return kernel_;
}

//---------------------------------------------------------------------------//

PriorDraw sample_prior_joint(const GpModel& model, const InputPoints& x, const InputPoints& x_star,
                             RandomStream& rng) {
  if (x.dim() != x_star.dim()) throw DimensionMismatch("sample_prior_joint: X and X* differ in dimension");
  if (x.dim() != model.input_dim()) throw DimensionMismatch("sample_prior_joint: kernel/input dimension mismatch");
  const Eigen::Index p = model.output_dim();
  const InputPoints all = InputPoints::concat(x, x_star);

  // Repeated locations share one entry so a function is single-valued there
  // even when jitter is needed.
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(all.size()));
  std::vector<Eigen::Index> unique_rows;
  for (Eigen::Index r = 0; r < all.size(); ++r) {
    Eigen::Index found = -1;
    for (std::size_t u = 0; u < unique_rows.size(); ++u) {
      if (all.row(unique_rows[u]) == all.row(r)) {
        found = static_cast<Eigen::Index>(u);
        break;
      }
    }
    if (found < 0) {
      found = static_cast<Eigen::Index>(unique_rows.size());
      unique_rows.push_back(r);
    }
    slot[static_cast<std::size_t>(r)] = found;
  }

  PriorDraw draw{Matrix(x.size(), p), Matrix(x_star.size(), p)};
  if (unique_rows.empty()) return draw;

  const auto nu = static_cast<Eigen::Index>(unique_rows.size());
  Matrix unique_values(nu, all.dim());
  for (Eigen::Index u = 0; u < nu; ++u) unique_values.row(u) = all.row(unique_rows[static_cast<std::size_t>(u)]);
  const InputPoints unique_points(std::move(unique_values));

  const Matrix k = eval_kernel(model.kernel(), unique_points, unique_points);
  const auto chol = cholesky_with_jitter(k);
  const Matrix sample = mvn_sample(Vector::Zero(nu * p), chol.factor, rng, 1);

  for (Eigen::Index r = 0; r < all.size(); ++r) {
    const Eigen::Index u = slot[static_cast<std::size_t>(r)];
    for (Eigen::Index i = 0; i < p; ++i) {
      const double value = sample(0, i * nu + u);
      if (r < x.size()) {
        draw.f(r, i) = value;
      } else {
        draw.f_star(r - x.size(), i) = value;
      }
    }
  }
  return draw;
}

Matrix simulate_observations(const Matrix& f, const GaussianLikelihood& lik, RandomStream& rng) {
  if (f.cols() != static_cast<Eigen::Index>(lik.noise_variance.size())) {
    throw DimensionMismatch("simulate_observations: one noise variance per output column required");
  }
  Matrix y = f;
  for (Eigen::Index i = 0; i < f.cols(); ++i) {
    const double sd = std::sqrt(lik.noise_variance[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < f.rows(); ++j) y(j, i) += sd * rng.normal();
  }
  return y;
}

PosteriorGaussian exact_posterior(const GpModel& model, const InputPoints& x, const Matrix& y,
                                  const InputPoints& x_star) {
  if (model.is_sparse()) throw InvalidArgument("exact_posterior: model uses sparse inference");
  check_shapes(model, x, y, x_star);
  const KernelSpec kernel = model.inference_kernel();
  const Eigen::Index m = x_star.size();

  PosteriorGaussian post;
  post.cov = eval_kernel(kernel, x_star, x_star);
  post.mean = Vector::Zero(post.cov.rows());
  if (x.size() > 0) {
    Matrix kxx = eval_kernel(kernel, x, x);
    kxx.diagonal() += noise_diagonal(model.likelihood(), x.size());
    const auto chol = cholesky_with_jitter(kxx);
    const Matrix kxs = eval_kernel(kernel, x, x_star);

    const Matrix z = triangular_solve(chol.factor, flatten_output_major(y), TriangularSide::kLower);
    const auto back = has_fault(model, WrongTriangularSide{}) ? TriangularSide::kLower : TriangularSide::kLowerTranspose;
    const Matrix alpha = triangular_solve(chol.factor, z, back);
    post.mean = kxs.transpose() * alpha;

    const Matrix v = triangular_solve(chol.factor, kxs, TriangularSide::kLower);
    post.cov.noalias() -= v.transpose() * v;
  }
  symmetrize(post.cov);
  return apply_fault(std::move(post), model.fault(), model.likelihood().noise_variance, m);
}

PosteriorGaussian sparse_posterior(const GpModel& model, const InputPoints& x, const Matrix& y,
                                   const InputPoints& x_star) {
  const auto* sparse = std::get_if<SparseInference>(&model.inference());
  if (!sparse) throw InvalidArgument("sparse_posterior: model uses exact inference");
  check_shapes(model, x, y, x_star);
  const KernelSpec kernel = model.inference_kernel();
  const InputPoints& z = sparse->inducing;
  const Eigen::Index m = x_star.size();
  const Eigen::Index p = model.output_dim();

  // Inducing variables live on the latent functions for coregionalization
  // kernels and on the outputs otherwise.
  Matrix kuu, kuf, kus;
  if (const auto* lmc = std::get_if<LinearCoregionalization>(&kernel.variant)) {
    const auto q_count = static_cast<Eigen::Index>(lmc->latent_kernels.size());
    const Eigen::Index k = z.size();
    kuu = Matrix::Zero(q_count * k, q_count * k);
    kuf = Matrix::Zero(q_count * k, p * x.size());
    kus = Matrix::Zero(q_count * k, p * m);
    for (Eigen::Index q = 0; q < q_count; ++q) {
      const auto& latent = lmc->latent_kernels[static_cast<std::size_t>(q)];
      kuu.block(q * k, q * k, k, k) = eval_kernel(latent, z, z);
      const Matrix kzx = eval_kernel(latent, z, x);
      const Matrix kzs = eval_kernel(latent, z, x_star);
      for (Eigen::Index i = 0; i < p; ++i) {
        kuf.block(q * k, i * x.size(), k, x.size()) = lmc->mixing(i, q) * kzx;
        kus.block(q * k, i * m, k, m) = lmc->mixing(i, q) * kzs;
      }
    }
  } else {
    kuu = eval_kernel(kernel, z, z);
    kuf = eval_kernel(kernel, z, x);
    kus = eval_kernel(kernel, z, x_star);
  }

  const auto luu = cholesky_with_jitter(kuu);
  const Vector inv_sd = noise_diagonal(model.likelihood(), x.size()).array().rsqrt();
  const Matrix phi = triangular_solve(luu.factor, kuf, TriangularSide::kLower) * inv_sd.asDiagonal();
  Matrix b = phi * phi.transpose();
  b.diagonal().array() += 1.0;
  const auto lb = cholesky_with_jitter(b);

  const Vector scaled_y = flatten_output_major(y).cwiseProduct(inv_sd);
  const Matrix c = triangular_solve(lb.factor, phi * scaled_y, TriangularSide::kLower);
  const Matrix psi = triangular_solve(luu.factor, kus, TriangularSide::kLower);
  const auto back = has_fault(model, WrongTriangularSide{}) ? TriangularSide::kLower : TriangularSide::kLowerTranspose;

  PosteriorGaussian post;
  post.mean = psi.transpose() * triangular_solve(lb.factor, c, back);
  const Matrix omega = triangular_solve(lb.factor, psi, TriangularSide::kLower);
  post.cov = eval_kernel(kernel, x_star, x_star);
  post.cov.noalias() -= psi.transpose() * psi;
  post.cov.noalias() += omega.transpose() * omega;
  symmetrize(post.cov);
  return apply_fault(std::move(post), model.fault(), model.likelihood().noise_variance, m);
}

PosteriorGaussian posterior(const GpModel& model, const InputPoints& x, const Matrix& y,
                            const InputPoints& x_star) {
  return model.is_sparse() ? sparse_posterior(model, x, y, x_star) : exact_posterior(model, x, y, x_star);
}

Matrix sample_posterior(const PosteriorGaussian& post, Eigen::Index count, RandomStream& rng) {
  if (post.chol.rows() != post.mean.size()) throw InvalidArgument("sample_posterior: factor not computed");
  if (post.mean.size() == 0) return Matrix(count, 0);
  return mvn_sample(post.mean, post.chol, rng, count);
}

PosteriorGaussian apply_fault(PosteriorGaussian post, const std::optional<FaultSpec>& fault,
                              const std::vector<double>& noise_variance, Eigen::Index num_test) {
  if (fault) {
    std::visit(Overloaded{
                   [&](const ScaledPosteriorVariance& f) { post.cov *= f.factor; },
                   [&](const ShiftedPosteriorMean& f) { post.mean.array() += f.offset; },
                   [&](const NoNoiseInPredictiveVariance&) {
                     // Remove the noise term from each marginal variance and
                     // rescale the correlations so the result stays PSD.
                     const Eigen::Index dim = post.cov.rows();
                     Vector scale(dim);
                     for (Eigen::Index k = 0; k < dim; ++k) {
                       const double noise = noise_variance.at(static_cast<std::size_t>(num_test > 0 ? k / num_test : 0));
                       const double v = post.cov(k, k);
                       double reduced = v - noise;
                       if (reduced < kVarianceFloor) {
                         reduced = kVarianceFloor;
                         ++post.clamped_entries;
                       }
                       scale(k) = v > 0.0 ? std::sqrt(reduced / v) : 0.0;
                     }
                     post.cov = scale.asDiagonal() * post.cov * scale.asDiagonal();
                     for (Eigen::Index k = 0; k < dim; ++k) {
                       if (!(post.cov(k, k) >= kVarianceFloor)) post.cov(k, k) = kVarianceFloor;
                     }
                   },
                   [](const TransposedMixingMatrix&) {},
                   [](const WrongTriangularSide&) {},
               },
               fault->variant);
  }
  const auto chol = cholesky_with_jitter(post.cov);
  post.chol = chol.factor;
  post.jitter_used = chol.jitter_used;
  return post;
}

//---------------------------------------------------------------------------//

HyperLayout hyper_layout(const GpModel& model) {
  const auto* se = std::get_if<SquaredExponential>(&model.kernel().variant);
  if (!se) throw InvalidArgument("type-II fitting supports squared-exponential kernels only");
  if (model.is_sparse()) throw InvalidArgument("type-II fitting requires exact inference");
  return HyperLayout{static_cast<Eigen::Index>(se->lengthscales.size()), model.output_dim()};
}

Vector log_hyperparameters(const GpModel& model) {
  const auto layout = hyper_layout(model);
  const auto& se = std::get<SquaredExponential>(model.kernel().variant);
  Vector theta(layout.size());
  theta(0) = std::log(se.signal_variance);
  for (Eigen::Index j = 0; j < layout.input_dim; ++j) theta(1 + j) = std::log(se.lengthscales[static_cast<std::size_t>(j)]);
  for (Eigen::Index i = 0; i < layout.output_dim; ++i) {
    theta(1 + layout.input_dim + i) = std::log(model.likelihood().noise_variance[static_cast<std::size_t>(i)]);
  }
  return theta;
}

GpModel model_from_log_hyperparameters(const HyperLayout& layout, const Vector& theta) {
  if (theta.size() != layout.size()) throw DimensionMismatch("log-hyperparameter vector has the wrong length");
  std::vector<double> lengthscales(static_cast<std::size_t>(layout.input_dim));
  for (Eigen::Index j = 0; j < layout.input_dim; ++j) lengthscales[static_cast<std::size_t>(j)] = std::exp(theta(1 + j));
  GaussianLikelihood lik{std::vector<double>(static_cast<std::size_t>(layout.output_dim))};
  for (Eigen::Index i = 0; i < layout.output_dim; ++i) {
    lik.noise_variance[static_cast<std::size_t>(i)] = std::exp(theta(1 + layout.input_dim + i));
  }
  return GpModel(make_se(std::exp(theta(0)), std::move(lengthscales)), std::move(lik));
}

LmlResult log_marginal_likelihood(const GpModel& model, const InputPoints& x, const Matrix& y, bool with_gradient) {
  const auto layout = hyper_layout(model);
  if (x.dim() != layout.input_dim) throw DimensionMismatch("log_marginal_likelihood: input dimension mismatch");
  if (y.rows() != x.size() || y.cols() != layout.output_dim) {
    throw DimensionMismatch("log_marginal_likelihood: observations must be n x p");
  }
  const auto& se = std::get<SquaredExponential>(model.kernel().variant);
  const Eigen::Index n = x.size();
  const Eigen::Index d = layout.input_dim;
  const Matrix kf = eval_kernel(model.kernel(), x, x);

  // Kf scaled by the squared, lengthscale-normalized distance along each input axis.
  std::vector<Matrix> dk_dlog_l;
  if (with_gradient) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double l2 = se.lengthscales[static_cast<std::size_t>(j)] * se.lengthscales[static_cast<std::size_t>(j)];
      Matrix dist(n, n);
      for (Eigen::Index b = 0; b < n; ++b) {
        for (Eigen::Index a = 0; a < n; ++a) {
          const double diff = x.values()(a, j) - x.values()(b, j);
          dist(a, b) = diff * diff / l2;
        }
      }
      dk_dlog_l.push_back(kf.cwiseProduct(dist));
    }
  }

  LmlResult result;
  result.gradient = Vector::Zero(layout.size());
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < layout.output_dim; ++i) {
    const double noise = model.likelihood().noise_variance[static_cast<std::size_t>(i)];
    Matrix ky = kf;
    ky.diagonal().array() += noise;
    const auto chol = cholesky_with_jitter(ky);
    const Matrix z = triangular_solve(chol.factor, y.col(i), TriangularSide::kLower);
    const Vector alpha = triangular_solve(chol.factor, z, TriangularSide::kLowerTranspose);
    result.value += -0.5 * z.squaredNorm() - chol.factor.diagonal().array().log().sum() -
                    0.5 * static_cast<double>(n) * log_2pi;
    if (!with_gradient) continue;

    const Matrix linv = triangular_solve(chol.factor, Matrix::Identity(n, n), TriangularSide::kLower);
    // W = alpha alpha^T - K^{-1}, built on the lower triangle and mirrored.
    Matrix w = Matrix::Zero(n, n);
    w.selfadjointView<Eigen::Lower>().rankUpdate(alpha);
    w.selfadjointView<Eigen::Lower>().rankUpdate(linv.transpose(), -1.0);
    w.triangularView<Eigen::StrictlyUpper>() = w.transpose();
    result.gradient(0) += 0.5 * w.cwiseProduct(kf).sum();
    for (Eigen::Index j = 0; j < d; ++j) {
      result.gradient(1 + j) += 0.5 * w.cwiseProduct(dk_dlog_l[static_cast<std::size_t>(j)]).sum();
    }
    result.gradient(1 + d + i) += 0.5 * noise * w.trace();
  }
  return result;
}

}  // namespace gpsbc
