#pragma once

#include <stdexcept>
#include <string>

namespace modguard {

// Base for every error the library raises on purpose. Callers that only care
// about "did it work" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (thresholds, weights, dimensions, paths).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that breaks a batch-level contract (duplicate ids, bad schema).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Stored file does not match its recorded checksum.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

// External validator backend failed (transport, 5xx, unparseable reply).
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace modguard
