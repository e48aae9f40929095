#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace spin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the domain of the operation (gamma >= 1, empty
/// multiset, alpha outside (0, 1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A policy or logged behavior probability does not give every action
/// positive probability, so importance weights are undefined.
class FullSupportError : public Error {
 public:
  using Error::Error;
};

/// The regression design matrix is rank deficient or has too few rows.
class SingularDesignError : public Error {
 public:
  using Error::Error;
};

/// The environment has no exact performance oracle.
class UnsupportedOracleError : public Error {
 public:
  using Error::Error;
};

/// A batch cannot be split into two non-empty parts.
class BatchTooSmallError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration; `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace spin
