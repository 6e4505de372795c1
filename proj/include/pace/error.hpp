#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pace {

/// Broad failure category. The CLI maps each category to an exit code.
enum class ErrorKind {
  config,   // bad parameters or configuration (exit 2)
  data,     // malformed, truncated or invalid input data (exit 3)
  numeric,  // divergence, singularity, non-convergence (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct IoError : DataError {
  using DataError::DataError;
};

struct FormatError : DataError {
  using DataError::DataError;
};

struct LengthError : DataError {
  using DataError::DataError;
};

struct ValidationError : DataError {
  using DataError::DataError;
};

struct DimensionError : DataError {
  using DataError::DataError;
};

struct InsufficientDataError : DataError {
  using DataError::DataError;
};

struct DegenerateError : DataError {
  using DataError::DataError;
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

struct SingularityError : NumericError {
  using NumericError::NumericError;
};

struct ConvergenceError : NumericError {
  using NumericError::NumericError;
};

/// Non-finite loss during gradient descent.
class DivergenceError : public NumericError {
 public:
  explicit DivergenceError(std::size_t iteration)
      : NumericError("loss became non-finite at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  DivergenceError(std::size_t iteration, const std::string& what)
      : NumericError(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numeric: return 4;
  }
  return 1;
}

}  // namespace pace
