#pragma once

#include <stdexcept>
#include <string>

namespace eegprompt {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied parameter violates an operation's precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), detail_(what), line_(line) {}
  std::size_t line() const { return line_; }
  // The message without the line suffix.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (including authentication failures). Aborts a run.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Network-level failure after retries are exhausted. Sample-level.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace eegprompt
