#pragma once

#include <stdexcept>
#include <string>

namespace disue {

// Malformed or out-of-range arguments (shape mismatch, bad label, zero vector).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation was called on an object in the wrong state
// (backward on a detached scalar, empty cluster, missing dataset).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Masked uploads from different rounds were paired.
class PairingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A non-finite gradient or loss appeared during optimization.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration rejected; `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace disue
