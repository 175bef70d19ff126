#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ridgepred {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition on the shape or kind of an input.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations);
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class DegenerateFeatureError : public Error {
 public:
  explicit DegenerateFeatureError(std::size_t column);
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class InfeasiblePanelError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class UnsupportedSigmaError : public Error {
 public:
  using Error::Error;
};

// Raised when omega sits inside the guard band around 1 where ridge-less and
// OLS limits diverge.
class NearSingularityError : public Error {
 public:
  using Error::Error;
};

// h2_beta = 1: the optimal penalty degenerates to 0+.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

// More than the tolerated share of simulation replicates failed.
class PartialFailureError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string key = {});
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ridgepred
