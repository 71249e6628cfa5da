#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rpb {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidSignal : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Errors that signal a numerical failure (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IntegrationBlowup : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class GradientBlowup : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TrainingDiverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConditionViolated : public Error {
 public:
  using Error::Error;
};

inline void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(want) +
                            ", got " + std::to_string(got));
  }
}

}  // namespace rpb
