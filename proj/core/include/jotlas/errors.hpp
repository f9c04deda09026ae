#pragma once

#include <stdexcept>
#include <string>

namespace jotlas {

/// Invalid or inconsistent configuration (unknown key, bad value, missing
/// required setting). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// File system or file format failure. Maps to CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown (non-finite iterate, SVD of non-finite input).
/// Maps to CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Distinct corruption classes for the JOTL tensor format.

class JotlBadMagicError : public IoError {
 public:
  explicit JotlBadMagicError(const std::string& what) : IoError(what) {}
};

class JotlTruncatedError : public IoError {
 public:
  explicit JotlTruncatedError(const std::string& what) : IoError(what) {}
};

class JotlUnsupportedError : public IoError {
 public:
  explicit JotlUnsupportedError(const std::string& what) : IoError(what) {}
};

}  // namespace jotlas
