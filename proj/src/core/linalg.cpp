// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#include "linalg.hpp"

#include <cmath>
#include <sstream>

#include "error.hpp"

namespace gpsbc {

InputPoints::InputPoints(Matrix values) : values_(std::move(values)) {
  if (values_.cols() < 1) throw InvalidArgument("input points need at least one dimension");
  if (!values_.allFinite()) throw InvalidArgument("input points contain non-finite entries");
}

InputPoints InputPoints::empty(Eigen::Index dim) { return InputPoints(Matrix(0, dim)); }

InputPoints InputPoints::linspace(double lo, double hi, Eigen::Index count) {
  Matrix v(count, 1);
  for (Eigen::Index i = 0; i < count; ++i) {
    v(i, 0) = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return InputPoints(std::move(v));
}

InputPoints InputPoints::concat(const InputPoints& a, const InputPoints& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("cannot concatenate points of different dimension");
  Matrix v(a.size() + b.size(), a.dim());
  v.topRows(a.size()) = a.values_;
  v.bottomRows(b.size()) = b.values_;
  return InputPoints(std::move(v));
}

std::vector<double> jitter_ladder(double base_jitter) {
  std::vector<double> ladder{0.0};
  double j = base_jitter;
  for (int k = 0; k < kJitterRungs; ++k, j *= 10.0) ladder.push_back(j);
  return ladder;
}

CholeskyResult cholesky_with_jitter(const Matrix& m, double base_jitter) {
  if (m.rows() != m.cols()) throw DimensionMismatch("cholesky: matrix is not square");
  if (!(base_jitter > 0.0)) throw InvalidArgument("cholesky: base jitter must be positive");
  const auto ladder = jitter_ladder(base_jitter);
  if (m.rows() == 0) return {Matrix(0, 0), 0.0};
  if (m.allFinite()) {
    Matrix work = m;
    for (double jitter : ladder) {
      if (jitter > 0.0) work.diagonal() = m.diagonal().array() + jitter;
      Eigen::LLT<Matrix> llt(work);
      if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    }
  }
  std::ostringstream msg;
  msg << "matrix is not positive definite after jitter ladder {";
  for (std::size_t k = 0; k < ladder.size(); ++k) msg << (k ? ", " : "") << ladder[k];
  msg << "}";
  throw NotPositiveDefinite(msg.str(), ladder);
}

Matrix triangular_solve(const Matrix& factor, const Matrix& rhs, TriangularSide side) {
  if (factor.rows() != factor.cols() || factor.rows() != rhs.rows()) {
    throw DimensionMismatch("triangular_solve: shape mismatch");
  }
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    if (factor(i, i) == 0.0) throw SingularTriangular("triangular_solve: zero on the diagonal");
  }
  const auto lower = factor.triangularView<Eigen::Lower>();
  if (side == TriangularSide::kLower) return lower.solve(rhs);
  return lower.transpose().solve(rhs);
}

Matrix mvn_sample(const Vector& mean, const Matrix& chol_lower, RandomStream& rng, Eigen::Index count) {
  const Eigen::Index dim = mean.size();
  if (chol_lower.rows() != dim || chol_lower.cols() != dim) {
    throw DimensionMismatch("mvn_sample: factor does not match mean");
  }
  if (count < 1) throw InvalidArgument("mvn_sample: count must be positive");
  Matrix z(dim, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    for (Eigen::Index i = 0; i < dim; ++i) z(i, k) = rng.normal();
  }
  Matrix draws = chol_lower.triangularView<Eigen::Lower>() * z;
  draws.colwise() += mean;
  return draws.transpose();
}

void symmetrize(Matrix& m) {
  const Matrix t = m.transpose();
  m = 0.5 * (m + t);
}

}  // namespace gpsbc
