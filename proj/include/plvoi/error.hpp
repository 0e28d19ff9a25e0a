#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plvoi {

enum class ErrorCode {
  input,          // bad program, bad flag, unknown observable
  inconsistent,   // evidence with probability zero
  resource_limit, // grounding or world enumeration too large
  malformed_plan,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(ErrorCode::input, std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

inline Error input_error(const std::string& what) { return Error(ErrorCode::input, what); }

/// Process exit code for an error category (0 is reserved for success).
inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::input:
    case ErrorCode::malformed_plan: return 2;
    case ErrorCode::inconsistent: return 3;
    case ErrorCode::resource_limit: return 4;
  }
  return 2;
}

}  // namespace plvoi
