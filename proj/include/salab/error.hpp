#pragma once

#include <stdexcept>
#include <string>

namespace salab {

/// Base of every error raised by the library. The C API maps each subclass to
/// one status code, so new subclasses need a matching entry in capi.cpp.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or incomplete configuration input (missing key, bad syntax).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A configuration value that parses but violates its admissible range.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operator assembly failed (degenerate grid, factorization breakdown).
class AssemblyError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix sizes do not match the discrete state layout.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A resolvent or shifted solve landed on (or too close to) the spectrum.
class NearSpectrumError : public Error {
 public:
  NearSpectrumError(const std::string& what, double beta, double residual)
      : Error(what), beta_(beta), residual_(residual) {}
  double beta() const noexcept { return beta_; }
  double residual() const noexcept { return residual_; }

 private:
  double beta_;
  double residual_;
};

/// A time step whose implicit solve missed its residual target.
class StepError : public Error {
 public:
  StepError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Not enough data (or an empty window) for a least-squares fit.
class FitError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace salab
