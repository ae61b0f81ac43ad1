#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhslam {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A factor refers to a variable that has no entry in the value set.
class MissingVariable : public Error {
 public:
  using Error::Error;
};

/// The normal equations cannot be solved: no prior, a dangling variable, or
/// a system that stays singular after every damping retry.
class GaugeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mhslam
