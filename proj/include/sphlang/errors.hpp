#pragma once

#include <stdexcept>
#include <string>

namespace sphlang {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A retraction or normalization was asked to divide by a (near) zero norm.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class NoSignalError : public Error {
 public:
  using Error::Error;
};

class ParityError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Power iteration ran out of iterations. Carries the last Rayleigh quotient.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_rayleigh)
      : Error(what), last_rayleigh_(last_rayleigh) {}

  double last_rayleigh() const noexcept { return last_rayleigh_; }

 private:
  double last_rayleigh_;
};

}  // namespace sphlang
