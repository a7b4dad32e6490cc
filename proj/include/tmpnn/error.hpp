#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tmpnn {

// Base of everything the library throws on bad input or numerical failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or order mismatch between maps, vectors and batches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid element or network construction request.
class BuildError : public Error {
 public:
  using Error::Error;
};

// Lattice or model text that could not be parsed.  Line and column are
// 1-based; zero means "unknown".
class ParseError : public Error {
 public:
  ParseError(std::string message, std::size_t line = 0, std::size_t column = 0)
      : Error(format(message, line, column)),
        message_(std::move(message)),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& message() const { return message_; }

 private:
  static std::string format(const std::string& msg, std::size_t line,
                            std::size_t column) {
    if (line == 0) return msg;
    return "line " + std::to_string(line) + ", column " +
           std::to_string(column) + ": " + msg;
  }

  std::string message_;
  std::size_t line_;
  std::size_t column_;
};

// Non-finite values during integration or training.  `step` is the RK4 step
// or the training epoch at which the failure was detected.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace tmpnn
