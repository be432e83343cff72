// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rng.hpp"

namespace gpsbc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultJitter = 1e-8;
inline constexpr int kJitterRungs = 7;

//---------------------------------------------------------------------------//
/*!
 * A set of input locations: one row per point, one column per input
 * dimension. Entries are finite. Zero rows are allowed (an empty test or
 * training set); zero columns are not.
 */
class InputPoints {
 public:
  InputPoints() = default;
  explicit InputPoints(Matrix values);
  /// Empty set of points in `dim` dimensions.
  static InputPoints empty(Eigen::Index dim);
  /// `count` equispaced 1-d points on [lo, hi] (inclusive).
  static InputPoints linspace(double lo, double hi, Eigen::Index count);

  Eigen::Index size() const noexcept { return values_.rows(); }
  Eigen::Index dim() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  auto row(Eigen::Index i) const { return values_.row(i); }

  /// Rows of `a` followed by rows of `b`.
  static InputPoints concat(const InputPoints& a, const InputPoints& b);

  friend bool operator==(const InputPoints& a, const InputPoints& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_;
  }

 private:
  Matrix values_;
};

struct CholeskyResult {
  Matrix factor;  // lower triangular
  double jitter_used = 0.0;
};

/// Jitter values tried by cholesky_with_jitter: 0, then base * 10^k, k = 0..6.
std::vector<double> jitter_ladder(double base_jitter);

/*!
 * Factor m + jitter * I = G G^T, escalating the jitter along jitter_ladder.
 *
 * Throws NotPositiveDefinite (carrying the ladder) when every rung fails.
 */
CholeskyResult cholesky_with_jitter(const Matrix& m, double base_jitter = kDefaultJitter);

enum class TriangularSide {
  kLower,           // solve G x = b
  kLowerTranspose,  // solve G^T x = b
};

/// Forward/back substitution against a lower-triangular factor.
Matrix triangular_solve(const Matrix& factor, const Matrix& rhs, TriangularSide side);

/*!
 * Draw `count` samples from N(mean, G G^T). Row k of the result is
 * mean + G z_k; the z_k are consumed from `rng` draw by draw, coordinate by
 * coordinate, so successive calls concatenate.
 */
Matrix mvn_sample(const Vector& mean, const Matrix& chol_lower, RandomStream& rng, Eigen::Index count);

/// Symmetrize in place: m = (m + m^T) / 2.
void symmetrize(Matrix& m);

}  // namespace gpsbc
