#ifndef RESADAPT_ERRORS_HPP_
#define RESADAPT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace resadapt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Unknown option, tag or inconsistent setting.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. a second backward pass without resetting gradients.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// The log barrier of the stream loss was evaluated at zero residual.
class BarrierDomainError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or was aborted.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Malformed input file. Line numbers are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace resadapt

#endif  // RESADAPT_ERRORS_HPP_
