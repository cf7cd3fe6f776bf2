#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace motionduet {

/// Malformed input file or document; maps to CLI exit code 2.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments; maps to CLI exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite loss or failed numerical check; maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace motionduet
