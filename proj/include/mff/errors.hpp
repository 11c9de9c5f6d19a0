#pragma once

#include <stdexcept>
#include <string>

namespace mff {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorKind : int {
  validation = 1,  // bad inputs, broken invariants, inconsistent configuration
  io_format = 2,   // unreadable files, malformed or truncated payloads
  numeric = 3,     // solver non-convergence, degenerate systems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& message)
      : Error(ErrorKind::io_format, message) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& message)
      : Error(ErrorKind::numeric, message) {}
};

}  // namespace mff
