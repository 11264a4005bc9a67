#pragma once

#include <stdexcept>
#include <string>

namespace lab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an operation's algebraic rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents; the message carries line/record context.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Bad command line, bad config, or an invalid argument value.
class UsageError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage was asked to run before the stage it depends on.
class MissingUpstreamError : public Error {
 public:
  MissingUpstreamError(const std::string& message, std::string required_command)
      : Error(message), required_command_(std::move(required_command)) {}
  const std::string& required_command() const noexcept { return required_command_; }

 private:
  std::string required_command_;
};

// NaN/Inf showed up where only finite values are allowed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lab
