#pragma once

#include <stdexcept>
#include <string>

namespace stvg {

// Invalid configuration or usage (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent data: files, schemas, alignment (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace stvg
