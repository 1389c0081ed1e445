#pragma once

#include <stdexcept>
#include <string>

namespace hcqos {

/// Invalid scenario, model, profile or argument. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Failure while a computation or simulation is running. Exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regressor matrix of an identification problem is rank deficient.
class IdentifiabilityError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// Power iteration did not settle within its iteration cap.
class ConvergenceError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// File system failure; the message carries the offending path. Exit code 3.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace hcqos
