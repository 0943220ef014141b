#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace dto {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptySequence : public Error {
 public:
  using Error::Error;
};

class DivisionDomain : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

// Backend failures.

class BackendError : public Error {
 public:
  using Error::Error;
};

/// Transport failure that persisted through every retry.
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

class RateLimited : public BackendError {
 public:
  RateLimited(const std::string& what, std::optional<double> retry_after_seconds)
      : BackendError(what), retry_after_(retry_after_seconds) {}

  std::optional<double> retry_after() const noexcept { return retry_after_; }

 private:
  std::optional<double> retry_after_;
};

/// Mock backend: no fixture rule matched the prompt.
class FixtureMiss : public BackendError {
 public:
  using BackendError::BackendError;
};

class MissingLogprobs : public BackendError {
 public:
  using BackendError::BackendError;
};

// Pipeline stage failures.

class NoCorrectCompletion : public Error {
 public:
  using Error::Error;
};

class JudgeParseError : public Error {
 public:
  using Error::Error;
};

class OptimizationFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace dto
