#pragma once

#include <stdexcept>
#include <string>

namespace spell {

// Base class for all errors raised by this library. The CLI maps each
// subclass to a distinct process exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent configuration (bad key, bad value, missing file
// section, invalid CLI usage). Exit code 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// Numerical failure: invalid domain, non-finite state, series that did not
// converge within its term budget. Exit code 3.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

// Filesystem or serialization failure. Exit code 4.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace spell
