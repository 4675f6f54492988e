#pragma once

#include <stdexcept>
#include <string>

namespace lulc {

// Base for all library errors. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or flags (exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind {
  BadMagic,
  BadVersion,
  TruncatedPayload,
  ClassIndexOutOfRange,
  DimensionMismatch,
  NotDivisible,
  Infeasible,
  Io,
  Other,
};

const char* to_string(FormatErrorKind kind);

// Data or file-format problems (exit code 2).
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

// Non-finite values, failed factorizations, divergent samplers (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lulc
