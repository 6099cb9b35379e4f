#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tfphase {

// Failure classes. The CLI maps these onto its exit codes.
enum class ErrorKind {
  invalid_argument,  // bad parameters, precondition violations
  unsupported,       // operation not defined for the window family
  io,                // missing files, malformed input
  numerical,         // degenerate zero, non-convergence, insufficient data
  domain             // evaluation at a point where the quantity is undefined
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::invalid_argument, what) {}
};

class UnsupportedOperation : public Error {
 public:
  explicit UnsupportedOperation(const std::string& what) : Error(ErrorKind::unsupported, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

// I/O failures carry a subkind so callers can tell a missing file from a
// malformed one; line is 1-based and 0 when not applicable.
class IoError : public Error {
 public:
  enum class Reason { missing_file, malformed_header, not_mono, unparsable_line, write_failed };

  IoError(Reason reason, const std::string& what, std::size_t line = 0)
      : Error(ErrorKind::io, what), reason_(reason), line_(line) {}

  Reason reason() const noexcept { return reason_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Reason reason_;
  std::size_t line_;
};

const char* to_string(ErrorKind kind);

}  // namespace tfphase
