#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fmlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Scalar argument outside its admissible range (t outside [0,1], p_drop > 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: integration blew up, a matrix square root is not PSD.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or received unusable input. Carries the failing step.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::uint64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  explicit TrainingError(const std::string& what) : Error(what) {}

  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_ = 0;
};

/// File system, parse or format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fmlab
