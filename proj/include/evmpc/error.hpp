#pragma once

#include <stdexcept>
#include <string>

namespace evmpc {

// Base for every library-raised error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed files, invalid parameters, inconsistent sizes.
class InputError : public Error {
 public:
  using Error::Error;
};

// A row-addressed problem in a text input (case file, CSV).
class ParseError : public InputError {
 public:
  ParseError(int row, const std::string& what)
      : InputError("row " + std::to_string(row) + ": " + what), row_(row) {}
  int row() const { return row_; }

 private:
  int row_;
};

// The optimizer could not produce a usable solution.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace evmpc
