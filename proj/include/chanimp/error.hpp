#pragma once

#include <stdexcept>
#include <string>

namespace chanimp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition (bad impedance, bad plan, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A map or matrix that must be inverted is singular at the requested point.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// The data carries no information about F (e.g. all V1 entries are zero).
class UnidentifiableError : public Error {
 public:
  using Error::Error;
};

/// Root finding did not converge from any seed.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// Malformed configuration; `key()` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace chanimp
