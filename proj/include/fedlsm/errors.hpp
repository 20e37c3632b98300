#pragma once

#include <stdexcept>
#include <string>

namespace fedlsm {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or hyperparameter.
class ConfigError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

// Non-finite values or divergence.
class NumericError : public Error {
public:
  using Error::Error;
};

// Input outside an operation's mathematical domain.
class DomainError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class AggregationError : public Error {
public:
  using Error::Error;
};

} // namespace fedlsm
