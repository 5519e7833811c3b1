#pragma once

#include <stdexcept>
#include <string>

namespace viosched {

// Base for all library errors. Subclasses exist so callers can map a
// failure class to an exit code or a recovery path without string matching.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Configuration or input that violates a documented invariant.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

class UnreadableSystemInfoError : public Error {
 public:
  using Error::Error;
};

class InvalidCoreIdError : public Error {
 public:
  using Error::Error;
};

class SamplerAlreadyRunningError : public Error {
 public:
  using Error::Error;
};

// Reported, non-fatal: callers may continue without affinity.
class AffinityUnsupportedError : public Error {
 public:
  using Error::Error;
};

class NonMonotonicTimestampError : public Error {
 public:
  using Error::Error;
};

class InsufficientWindowError : public Error {
 public:
  using Error::Error;
};

class UnknownMethodError : public Error {
 public:
  using Error::Error;
};

class FileNotFoundError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Parse failure at a specific physical line (1-based, header included).
class MalformedRowError : public Error {
 public:
  MalformedRowError(const std::string& msg, long line)
      : Error(msg + " at line " + std::to_string(line)), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class SchemaMismatchError : public Error {
 public:
  explicit SchemaMismatchError(const std::string& msg, std::string column = "")
      : Error(msg), column_(std::move(column)) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class TraceMismatchError : public Error {
 public:
  using Error::Error;
};

class InvalidTraceError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOnHostError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace viosched
