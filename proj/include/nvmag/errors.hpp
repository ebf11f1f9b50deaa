#pragma once

#include <stdexcept>
#include <string>

namespace nvmag {

// Exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  usage = 2,
  data = 3,
  numerical = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const { return ExitCode::data; }
};

// Invalid physical parameter (non-finite, out of range).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Mismatched dimensions or sequence lengths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (drive off every transition, T_C mismatch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::usage; }
};

// Quadrature divergence, failed fit and similar.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::numerical; }
};

class FitError : public NumericalError {
 public:
  FitError(const std::string& what, double residual_norm = 0.0)
      : NumericalError(what), residual_norm_(residual_norm) {}
  double residual_norm() const { return residual_norm_; }

 private:
  double residual_norm_;
};

}  // namespace nvmag
