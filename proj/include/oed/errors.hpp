#pragma once

#include <stdexcept>
#include <string>

namespace oed {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (shapes, ranges, symmetry).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Dense materialization refused because it would exceed the entry cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// An iterative linear solver did not reach its tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : Error(what + " (relative residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// NaN/Inf, eigensolver failure, or a violated numerical invariant.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A theorem hypothesis (e.g. eigenvalue gap) does not hold.
class AssumptionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; `path()` is the JSON path of the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& msg)
      : Error(path.empty() ? msg : path + ": " + msg), path_(std::move(path)) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace oed
