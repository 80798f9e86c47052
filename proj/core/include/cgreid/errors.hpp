#pragma once

#include <stdexcept>

namespace cgreid {

// Malformed, truncated, or version-mismatched artifacts on disk
// (checkpoints, dataset directories, feature files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected run configuration: unknown keys, bad values, inconsistent specs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training aborted on a non-finite or exploding loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cgreid
