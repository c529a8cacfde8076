#pragma once

#include <stdexcept>
#include <string>

namespace cardiomm {

/// Bad configuration or invalid arguments. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A required upstream artifact (checkpoint, dataset) is missing. Exit code 3.
struct DependencyError : std::runtime_error {
  explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where finite ones are required. Exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File format or I/O failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check_arg(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace cardiomm
