#pragma once

#include <stdexcept>
#include <string>

namespace mpopi {

// Base of every error the library throws. `kind()` is the stable class name
// reported by the CLI on failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

// Malformed data handed to an operation (non-finite values, shape mismatch).
class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "InputError"; }
};

// A scalar or integer parameter outside its admissible range.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what, std::string field = {})
      : Error(what), field_(std::move(field)) {}
  const char* kind() const noexcept override { return "ParameterError"; }
  // Name of the offending parameter when known.
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Something that cannot happen when upstream contracts hold, e.g. a Cholesky
// failure on a floored covariance.
class InvariantError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "InvariantError"; }
};

// A controller step could not produce an action (every rollout failed).
class StepFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "StepFailure"; }
};

// Experiment configuration problems. `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const char* kind() const noexcept override { return "ConfigError"; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class ConfigParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "ConfigParseError"; }
};

class ConfigFileError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "ConfigFileError"; }
};

}  // namespace mpopi
