#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace itals {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the source name and 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& message)
      : Error(source + ":" + std::to_string(line) + ": " + message),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Coordinates, shapes or configuration values that violate an invariant.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A linear system could not be solved.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The dense oracle was asked to enumerate more cells than its cap.
class OracleLimitError : public Error {
 public:
  using Error::Error;
};

/// A model file is truncated, has the wrong magic or an unknown version.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace itals
