#pragma once

#include <stdexcept>
#include <string>

namespace resmpc {

// Bad file contents, incompatible metadata, invalid configuration values.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Caller handed a value outside the documented input domain.
struct InputDomainError : std::invalid_argument {
  explicit InputDomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Requested operation is not defined for this configuration (e.g. Hessians
// of a relu network).
struct UnsupportedError : std::runtime_error {
  explicit UnsupportedError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace resmpc
