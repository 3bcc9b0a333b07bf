#pragma once

#include <stdexcept>
#include <string>

namespace edl {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when a kernel-density query lies so far outside the data support
/// that every kernel weight underflows.
class KdeUnderflowError : public Error {
 public:
  explicit KdeUnderflowError(const std::string& msg) : Error(msg) {}
};

/// Raised when an SDE trajectory leaves the representable range.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

/// Raised on malformed configuration input; the message names the field.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace edl
