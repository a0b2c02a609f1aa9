#pragma once

#include <stdexcept>
#include <string>

namespace ssenc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or length disagreement between arguments.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed or degenerate input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid or infeasible configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or version-mismatched model file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ssenc
