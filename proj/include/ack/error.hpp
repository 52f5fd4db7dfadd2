#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ack {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid layer/block configuration or bad user-supplied option.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Internal bookkeeping that no longer matches (stale caches, bad indices).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Corrupt, truncated or mis-versioned files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Arguments outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace ack
