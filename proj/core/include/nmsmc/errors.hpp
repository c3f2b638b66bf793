#pragma once

#include <stdexcept>
#include <string>

namespace nmsmc {

/// Invalid configuration or argument. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File system or parse failure on an external artifact. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmsmc
