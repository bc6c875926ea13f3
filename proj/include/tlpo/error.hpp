#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tlpo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (ingestion, preconditions on records).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid scenario or command configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A model quantity is numerically degenerate (pbar ~ 0, singular V, ...).
class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

/// Kaplan-Meier censoring survival fell below the positivity floor.
class PositivityError : public Error {
 public:
  using Error::Error;
};

/// Too many replicates failed for some estimator in a Monte Carlo run.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Newton iteration failed (separation, non-convergence). Carries the last iterate.
class FitError : public Error {
 public:
  FitError(const std::string& what, Eigen::VectorXd last_iterate)
      : Error(what), last_(std::move(last_iterate)) {}
  const Eigen::VectorXd& last_iterate() const noexcept { return last_; }

 private:
  Eigen::VectorXd last_;
};

}  // namespace tlpo
