#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace relulab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (layer widths, vector lengths, probe dims).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the range where a formula is defined.
class DomainError : public Error {
 public:
  DomainError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  explicit DomainError(const std::string& what) : Error(what) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A computation produced a non-finite value.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::optional<long> step = std::nullopt)
      : Error(step ? what + " (step " + std::to_string(*step) + ")" : what), step_(step) {}

  std::optional<long> step() const noexcept { return step_; }

 private:
  std::optional<long> step_;
};

/// Too few samples for a statistic to be meaningful.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Input exceeds the hard size caps of an exponential-time routine.
class RefusalError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or generator spec.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace relulab
