#pragma once

#include <stdexcept>
#include <string>

namespace croprl {

// Bad configuration: unknown scenario name, invalid parameter ranges, ...
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: missing file, malformed row, schema mismatch, ...
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value reached a place where it must never be silently clamped.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace croprl
