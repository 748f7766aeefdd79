#pragma once

#include <stdexcept>
#include <string>

namespace tlab {

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).

/// Invalid configuration value; `what()` starts with the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input file (dataset, chains, map).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while running the sampler (initialization, divergences).
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tlab
