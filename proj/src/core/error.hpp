// Copyright 2026 The gp-sbc Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpsbc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Numerical failures. Trials that raise these are recorded and skipped.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(std::string msg, std::vector<double> ladder)
      : NumericalError(std::move(msg)), ladder_(std::move(ladder)) {}
  /// Jitter values that were tried, in order.
  const std::vector<double>& ladder() const noexcept { return ladder_; }

 private:
  std::vector<double> ladder_;
};

class SingularTriangular : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FitFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Too many failed trials in an SBC run.
class TrialFailureLimit : public NumericalError {
 public:
  TrialFailureLimit(std::string msg, std::vector<std::int64_t> failed)
      : NumericalError(std::move(msg)), failed_(std::move(failed)) {}
  const std::vector<std::int64_t>& failed_trials() const noexcept { return failed_; }

 private:
  std::vector<std::int64_t> failed_;
};

/// Configuration problems: malformed JSON or a value violating a constraint.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpsbc
