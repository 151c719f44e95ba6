#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advpc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when an optimisation or sampling loop produces non-finite values.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace advpc
